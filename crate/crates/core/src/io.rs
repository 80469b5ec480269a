//! Plain-text data files: numeric CSV tables with `# key=value` metadata
//! lines, and JSON provenance sidecars.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a table
//! and writing it again reproduces the file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::EnsembleStats;
use crate::walk::{WalkGenerator, WalkRun};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { meta: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!("row of {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.meta {
            if k.contains('=') || k.contains('\n') || v.contains('\n') {
                return Err(Error::Parse(format!("metadata `{k}` must be a single line without `=` in the key")));
            }
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| format!("{x:?}")))?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(out)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let rest = rest.trim_end_matches('\n');
            let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse(format!("bad metadata line `{rest}`")))?;
            meta.push((k.to_string(), v.to_string()));
            body_start += line.len();
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text[body_start..].as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Parse(format!("row of {} values for {} columns", row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Table { meta, columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }
}

/// Fixed header of ensemble files.
pub const ENSEMBLE_COLUMNS: [&str; 8] =
    ["time", "mean_P", "var_P", "stderr_P", "mean_entropy", "mean_Sz", "mean_J2", "n_traj"];

/// One row per record time; observables that were not recorded are NaN.
pub fn ensemble_table(stats: &EnsembleStats) -> Table {
    let mut t = Table::new(ENSEMBLE_COLUMNS.iter().map(|s| s.to_string()).collect());
    let opt = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map_or(f64::NAN, |v| v[i]);
    for i in 0..stats.times.len() {
        t.rows.push(vec![
            stats.times[i],
            stats.mean[i],
            stats.variance[i],
            stats.stderr[i],
            opt(&stats.mean_entropy, i),
            stats.mean_sz[i],
            opt(&stats.mean_j2, i),
            stats.n_traj as f64,
        ]);
    }
    t
}

pub fn ensemble_from_table(t: &Table) -> Result<EnsembleStats> {
    let counts = t.column("n_traj")?;
    let n_traj = counts.first().copied().unwrap_or(0.0);
    if counts.iter().any(|&c| c != n_traj) || !(n_traj >= 0.0 && n_traj.fract() == 0.0) {
        return Err(Error::Parse("`n_traj` must be one non-negative integer".into()));
    }
    let opt = |name: &str| -> Result<Option<Vec<f64>>> {
        let v = t.column(name)?;
        Ok(if v.iter().all(|x| x.is_nan()) { None } else { Some(v) })
    };
    Ok(EnsembleStats {
        times: t.column("time")?,
        mean: t.column("mean_P")?,
        variance: t.column("var_P")?,
        stderr: t.column("stderr_P")?,
        n_traj: n_traj as usize,
        mean_entropy: opt("mean_entropy")?,
        mean_sz: t.column("mean_Sz")?,
        mean_j2: opt("mean_J2")?,
    })
}

/// `time, P_1, …, P_k, sum_P` with orbit labels in the metadata.
pub fn walk_table(gen: &WalkGenerator, run: &WalkRun) -> Table {
    let mut cols = vec!["time".to_string()];
    for r in gen.representatives() {
        let name = r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_");
        cols.push(format!("P_{name}"));
    }
    cols.push("sum_P".into());
    let mut t = Table::new(cols)
        .with_meta("L", gen.num_sites())
        .with_meta("d", gen.params().dim)
        .with_meta("orbit_sizes", gen.orbit_sizes().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
    for (i, p) in run.profiles.iter().enumerate() {
        let mut row = vec![run.times[i]];
        row.extend_from_slice(p);
        row.push(run.totals[i]);
        t.rows.push(row);
    }
    t
}

/// One point of a walk sweep; `delta` is NaN for the nearest-neighbour walk
/// and `mu` is NaN when it was not computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub num_sites: usize,
    pub dim: usize,
    pub kappa: f64,
    pub eta: f64,
    pub tau: f64,
    pub mu: f64,
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(["delta", "L", "d", "kappa", "eta", "tau", "mu"].iter().map(|s| s.to_string()).collect());
    for r in rows {
        t.rows.push(vec![r.delta, r.num_sites as f64, r.dim as f64, r.kappa, r.eta, r.tau, r.mu]);
    }
    t
}

/// Resolved configuration of a run, written next to its data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(command: &str, config: serde_json::Value, master_seed: Option<u64>) -> Self {
        Provenance { command: command.into(), config, master_seed, version: env!("CARGO_PKG_VERSION").into() }
    }
}

/// `<data>.meta.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_sidecar(data: &Path, prov: &Provenance) -> Result<PathBuf> {
    let path = sidecar_path(data);
    fs::write(&path, serde_json::to_string_pretty(prov)? + "\n")?;
    Ok(path)
}

pub fn read_sidecar(data: &Path) -> Result<Provenance> {
    Ok(serde_json::from_str(&fs::read_to_string(sidecar_path(data))?)?)
}
