//! Benchmark harnesses: one training run per table cell, then a table.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use kanformer_core::data::{feynman_registry, feynman_spec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset;
use crate::error::{Error, Result};
use crate::settings::{ResolvedConfig, Task};
use crate::train::{run_training, EvalMetrics};

/// One training run.
#[derive(Clone, Debug)]
pub struct Cell {
    /// Row label in the table.
    pub row: String,
    pub config: ResolvedConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub task: String,
    pub row: String,
    pub fingerprint: String,
    pub seed: u64,
    pub metrics: EvalMetrics,
    pub best_epoch: usize,
    pub runtime_s: f64,
}

/// Worker count from `KANFORMER_THREADS`, default 1.
pub fn worker_count() -> usize {
    std::env::var("KANFORMER_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn cell_dir(out: &Path, cell: &Cell, task: &str, seed: u64) -> PathBuf {
    let task = task.replace(':', "-");
    out.join("runs").join(format!("{task}-{}-seed{seed}", cell.row))
}

/// Train every cell, `workers` at a time; results come back in cell order.
pub fn run_cells(cells: &[Cell], out: &Path, workers: usize) -> Result<Vec<BenchResult>> {
    let runs: Vec<_> = cells
        .iter()
        .map(|c| c.config.build())
        .collect::<Result<_>>()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<BenchResult>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let run = &runs[i];
                let task = run.task.to_string();
                let start = Instant::now();
                let result = dataset::load(run).and_then(|data| {
                    let dir = cell_dir(out, &cells[i], &task, run.train.seed);
                    run_training(run, &data, &dir)
                });
                let result = result.map(|o| BenchResult {
                    task,
                    row: cells[i].row.clone(),
                    fingerprint: run.resolved.fingerprint(),
                    seed: run.train.seed,
                    metrics: o.best,
                    best_epoch: o.best_epoch,
                    runtime_s: start.elapsed().as_secs_f64(),
                });
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every cell ran")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Better {
    Lower,
    Higher,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    /// `None` for label columns.
    pub better: Option<Better>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Text(String),
    Metric { mean: f64, sd: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    /// Per-row fingerprints of the configurations behind each row.
    pub configs: Vec<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl Table {
    /// Row indices holding the best value of each metric column.
    pub fn best_rows(&self) -> Vec<Option<usize>> {
        self.columns
            .iter()
            .enumerate()
            .map(|(c, col)| {
                let better = col.better?;
                let mut best: Option<(usize, f64)> = None;
                for (r, row) in self.rows.iter().enumerate() {
                    if let Value::Metric { mean, .. } = row[c] {
                        let wins = best.map_or(true, |(_, b)| match better {
                            Better::Lower => mean < b,
                            Better::Higher => mean > b,
                        });
                        if wins && mean.is_finite() {
                            best = Some((r, mean));
                        }
                    }
                }
                best.map(|(r, _)| r)
            })
            .collect()
    }

    /// Fingerprint of everything that determines the table's values.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for row in &self.configs {
            for fp in row {
                h.update(fp.as_bytes());
                h.update(b"\n");
            }
        }
        h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    fn cell_text(&self, c: usize, v: &Value) -> String {
        match v {
            Value::Text(t) => t.clone(),
            Value::Metric { mean, sd } => {
                let f = |x: f64| match self.columns[c].better {
                    Some(Better::Lower) => format!("{x:.3e}"),
                    _ => format!("{x:.4}"),
                };
                match sd {
                    Some(sd) => format!("{}±{}", f(*mean), f(*sd)),
                    None => f(*mean),
                }
            }
        }
    }

    /// Markdown puts the best value of each metric column in bold; CSV adds
    /// a final `Best` column naming the metric columns a row wins.
    pub fn render(&self, format: TableFormat) -> Result<String> {
        if self.columns.is_empty() {
            return Err(Error::Runtime("a table needs at least one column".into()));
        }
        let best = self.best_rows();
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let mut out = String::new();
        match format {
            TableFormat::Markdown => {
                out.push_str(&format!("| {} | Config |\n", names.join(" | ")));
                out.push_str(&format!("|{}\n", "---|".repeat(names.len() + 1)));
                for (r, row) in self.rows.iter().enumerate() {
                    let cells: Vec<String> = row
                        .iter()
                        .enumerate()
                        .map(|(c, v)| {
                            let t = self.cell_text(c, v);
                            if best[c] == Some(r) {
                                format!("**{t}**")
                            } else {
                                t
                            }
                        })
                        .collect();
                    out.push_str(&format!("| {} | {} |\n", cells.join(" | "), self.configs[r].join(" ")));
                }
            }
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let to_err = |e: csv::Error| Error::Runtime(e.to_string());
                let mut header = names.clone();
                header.extend(["Config", "Best"]);
                w.write_record(&header).map_err(to_err)?;
                for (r, row) in self.rows.iter().enumerate() {
                    let mut cells: Vec<String> = row.iter().enumerate().map(|(c, v)| self.cell_text(c, v)).collect();
                    cells.push(self.configs[r].join(" "));
                    let wins: Vec<&str> = (0..names.len()).filter(|&c| best[c] == Some(r)).map(|c| names[c]).collect();
                    cells.push(wins.join(";"));
                    w.write_record(&cells).map_err(to_err)?;
                }
                out = String::from_utf8(w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?).unwrap();
            }
        }
        Ok(out)
    }
}

pub fn emit_table(table: &Table, format: TableFormat, path: &Path) -> Result<()> {
    let text = table.render(format)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `<out>/tables/<stem>-<fingerprint>.{md,csv}`; returns both paths.
pub fn emit_both(table: &Table, out: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let base = out.join("tables").join(format!("{stem}-{}", table.fingerprint()));
    let md = base.with_extension("md");
    let csv = base.with_extension("csv");
    emit_table(table, TableFormat::Markdown, &md)?;
    emit_table(table, TableFormat::Csv, &csv)?;
    Ok((md, csv))
}

fn write_results(out: &Path, results: &[BenchResult]) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("results.jsonl");
    let mut text = String::new();
    for r in results {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::Runtime(e.to_string()))?);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn mean_sd(xs: &[f64]) -> Value {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Value::Metric { mean, sd }
}

fn with_seeds(base: &ResolvedConfig, row: &str, seeds: &[u64]) -> Result<Vec<Cell>> {
    seeds
        .iter()
        .map(|&s| {
            let mut config = base.clone();
            config.set("train.seed", s as i64)?;
            Ok(Cell {
                row: row.to_string(),
                config,
            })
        })
        .collect()
}

/// Lowest test RMSE per equation, rows in registry order.
pub fn bench_feynman(equations: &[String], base: &ResolvedConfig, seeds: &[u64], out: &Path) -> Result<Table> {
    let unknown: Vec<&str> = equations
        .iter()
        .filter(|e| feynman_spec(e).is_err())
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::config("--equations", format!("unknown equations: {}", unknown.join(", "))));
    }
    let ordered: Vec<String> = feynman_registry()
        .into_iter()
        .map(|s| s.id.to_string())
        .filter(|id| equations.contains(id))
        .collect();
    let mut cells = Vec::new();
    for id in &ordered {
        let mut c = base.clone();
        c.set("train.task", format!("feynman:{id}"))?;
        cells.extend(with_seeds(&c, id, seeds)?);
    }
    let results = run_cells(&cells, out, worker_count())?;
    write_results(out, &results)?;
    let per = seeds.len().max(1);
    let mut table = Table {
        columns: vec![
            Column {
                name: "Feynman Eq.".into(),
                better: None,
            },
            Column {
                name: "RMSE".into(),
                better: Some(Better::Lower),
            },
        ],
        rows: Vec::new(),
        configs: Vec::new(),
    };
    for (id, group) in ordered.iter().zip(results.chunks(per)) {
        let values: Vec<f64> = group
            .iter()
            .map(|r| match r.metrics {
                EvalMetrics::Regression { lowest_so_far, .. } => lowest_so_far,
                EvalMetrics::Classification { .. } => f64::NAN,
            })
            .collect();
        table.rows.push(vec![Value::Text(id.clone()), mean_sd(&values)]);
        table.configs.push(group.iter().map(|r| r.fingerprint.clone()).collect());
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Experts,
    Topk,
}

impl Axis {
    pub fn key(self) -> &'static str {
        match self {
            Axis::Experts => "moe.num_experts",
            Axis::Topk => "moe.top_k",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Axis::Experts => "Expert",
            Axis::Topk => "Top-k",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Experts => "experts",
            Axis::Topk => "topk",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experts" => Ok(Axis::Experts),
            "topk" => Ok(Axis::Topk),
            _ => Err(Error::config("--axis", format!("unknown axis {s:?}; expected experts or topk"))),
        }
    }
}

fn dataset_title(task: &Task) -> &'static str {
    match task {
        Task::Cifar(kanformer_core::data::CifarVariant::Cifar100) => "CIFAR-100",
        Task::Cifar(_) => "CIFAR-10",
        Task::Feynman(_) => "Feynman",
    }
}

/// Every (dataset, value) cell configuration, validated up front.
pub fn ablation_cells(axis: Axis, values: &[usize], datasets: &[Task], base: &ResolvedConfig) -> Result<Vec<(Task, usize, ResolvedConfig)>> {
    let mut cells = Vec::new();
    for task in datasets {
        for &v in values {
            let mut c = base.clone();
            c.set("train.task", task.to_string())?;
            c.set(axis.key(), v as i64)?;
            c.build()?;
            cells.push((task.clone(), v, c));
        }
    }
    Ok(cells)
}

/// One row per swept value with Acc1/Acc5 per dataset.
pub fn bench_ablation(axis: Axis, values: &[usize], datasets: &[Task], base: &ResolvedConfig, seeds: &[u64], out: &Path) -> Result<Table> {
    if values.is_empty() {
        return Err(Error::config("--values", "need at least one value"));
    }
    if datasets.iter().any(|t| matches!(t, Task::Feynman(_))) {
        return Err(Error::config("--datasets", "ablations run on cifar10 and cifar100"));
    }
    let configs = ablation_cells(axis, values, datasets, base)?;
    let mut cells = Vec::new();
    for (_, v, c) in &configs {
        let row = format!("{}{v}", axis.name());
        cells.extend(with_seeds(c, &row, seeds)?);
    }
    let results = run_cells(&cells, out, worker_count())?;
    write_results(out, &results)?;
    let per = seeds.len().max(1);

    let mut columns = vec![Column {
        name: axis.header().into(),
        better: None,
    }];
    for task in datasets {
        for m in ["Acc1", "Acc5"] {
            columns.push(Column {
                name: format!("{} ({m})", dataset_title(task)),
                better: Some(Better::Higher),
            });
        }
    }
    let mut rows: Vec<Vec<Value>> = values.iter().map(|v| vec![Value::Text(v.to_string())]).collect();
    let mut fps: Vec<Vec<String>> = vec![Vec::new(); values.len()];
    for (i, group) in results.chunks(per).enumerate() {
        let row = i % values.len();
        let pick = |f: fn(&EvalMetrics) -> f64| -> Vec<f64> { group.iter().map(|r| f(&r.metrics)).collect() };
        let acc1 = pick(|m| match m {
            EvalMetrics::Classification { acc1, .. } => *acc1,
            EvalMetrics::Regression { .. } => f64::NAN,
        });
        let acc5 = pick(|m| match m {
            EvalMetrics::Classification { acc5, .. } => *acc5,
            EvalMetrics::Regression { .. } => f64::NAN,
        });
        rows[row].push(mean_sd(&acc1));
        rows[row].push(mean_sd(&acc5));
        fps[row].extend(group.iter().map(|r| r.fingerprint.clone()));
    }
    Ok(Table {
        columns,
        rows,
        configs: fps,
    })
}
