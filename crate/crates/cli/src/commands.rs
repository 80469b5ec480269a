use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use ffcontrol::analysis::{dicke_entropy, fit_cutoff_collapse, fit_power_law, Series, TailWindow};
use ffcontrol::io::{ensemble_table, sweep_table, walk_table, write_sidecar, Provenance, SweepRow, Table};
use ffcontrol::oracle::{DensityMatrix, Oracle};
use ffcontrol::protocols::{
    fredkin_residual, max_projector_expectation, target_state, Family, ProtocolSpec, TargetKind,
};
use ffcontrol::trajectory::{log_grid, run_ensemble, TrajectoryConfig};
use ffcontrol::walk::{build_generator, dispersion_asymptotics, mu_crossing, mu_exponent, WalkParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{config_err, load_toml, parse_target, product, CliResult, Failure, ProtocolArgs};
use crate::{is_stdout, overlay};

fn write_table(table: &Table, out: &Option<PathBuf>, prov: &Provenance) -> CliResult<()> {
    let text = table.to_csv_string()?;
    if is_stdout(out) {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        let path = out.as_deref().unwrap();
        fs::write(path, text)?;
        write_sidecar(path, prov)?;
    }
    Ok(())
}

fn write_json(value: &Value, out: &Option<PathBuf>, prov: &Provenance) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if is_stdout(out) {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        let path = out.as_deref().unwrap();
        fs::write(path, text)?;
        write_sidecar(path, prov)?;
    }
    Ok(())
}

fn record_grid(tmin: f64, tmax: f64, per_decade: usize) -> CliResult<Vec<f64>> {
    if !(tmin > 0.0 && tmax > tmin && tmax.is_finite()) {
        return Err(config_err("tmax", format!("need 0 < tmin < tmax, got tmin = {tmin}, tmax = {tmax}")));
    }
    if per_decade == 0 {
        return Err(config_err("per_decade", "must be positive"));
    }
    Ok(log_grid(tmin, tmax, per_decade))
}

fn protocol_meta(table: Table, spec: &ProtocolSpec) -> CliResult<Table> {
    Ok(table
        .with_meta("family", spec.family)
        .with_meta("L", spec.num_sites)
        .with_meta("protocol", serde_json::to_string(spec)?))
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryArgs {
    /// TOML file with the same keys (protocol keys under `[protocol]`); flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// First record time of the logarithmic grid.
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Number of trajectories.
    #[arg(long)]
    pub traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub entropy: Option<bool>,
    #[arg(long)]
    pub j2: Option<bool>,
    /// Evolve the full Hilbert space instead of the charge sector of the initial state.
    #[arg(long)]
    pub full_space: Option<bool>,
    #[arg(long)]
    pub absorb_tol: Option<f64>,
    /// Output CSV (`-` or absent: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn trajectory(mut a: TrajectoryArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: TrajectoryArgs = load_toml(&path)?;
        a.protocol.overlay(std::mem::take(&mut file.protocol));
        overlay!(a, file; tmax, tmin, per_decade, traj, seed, entropy, j2, full_space, absorb_tol, out);
    }
    let spec = a.protocol.to_spec()?;
    let tmax = a.tmax.unwrap_or(100.0);
    let n_traj = a.traj.unwrap_or(1000);
    if n_traj == 0 {
        return Err(config_err("traj", "need at least one trajectory"));
    }
    let mut cfg = TrajectoryConfig::new(spec.clone(), tmax, a.seed.unwrap_or(0));
    cfg.record_grid = Some(record_grid(a.tmin.unwrap_or(0.1), tmax, a.per_decade.unwrap_or(30))?);
    cfg.record_entropy = a.entropy.unwrap_or(true);
    cfg.record_j2 = a.j2.unwrap_or(true);
    cfg.restrict_sector = !a.full_space.unwrap_or(false);
    if let Some(t) = a.absorb_tol {
        cfg.absorb_tol = t;
    }
    cfg.validate()?;
    let stats = run_ensemble(&cfg, n_traj)?;
    let table = protocol_meta(ensemble_table(&stats), &spec)?.with_meta("seed", cfg.master_seed);
    let prov = Provenance::new("trajectory", json!({ "trajectory": cfg, "n_traj": n_traj }), Some(cfg.master_seed));
    write_table(&table, &a.out, &prov)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn oracle(mut a: OracleArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: OracleArgs = load_toml(&path)?;
        a.protocol.overlay(std::mem::take(&mut file.protocol));
        overlay!(a, file; tmax, tmin, per_decade, out);
    }
    let spec = a.protocol.to_spec()?;
    let tmax = a.tmax.unwrap_or(100.0);
    let grid = record_grid(a.tmin.unwrap_or(0.1), tmax, a.per_decade.unwrap_or(30))?;
    let oracle = Oracle::new(&spec)?;
    let rho0 = DensityMatrix::from_state(&spec.initial_state()?);
    let run = oracle.evolve(&rho0, &grid)?;
    let table = protocol_meta(ensemble_table(&run.to_stats()), &spec)?
        .with_meta("renormalizations", run.renormalizations)
        .with_meta("max_drift", run.max_drift);
    let prov = Provenance::new("oracle", json!({ "protocol": spec, "t_max": tmax, "record_grid": grid }), None);
    write_table(&table, &a.out, &prov)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkMode {
    /// Smallest decay rate τ for every sweep point.
    Tau,
    /// τ and the exponent μ from sizes L and 2L.
    Mu,
    /// Time evolution of the folded profile.
    Evolve,
    /// Noisy fixed point.
    Stationary,
    /// Small-q behaviour of the long-range kernel.
    Dispersion,
    /// Δ at which μ(Δ) curves of two sizes cross.
    Crossing,
}

/// A range exponent, or `nn` for nearest neighbours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Range {
    Power(f64),
    Named(String),
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.parse::<f64>() {
            Ok(x) => Ok(Range::Power(x)),
            Err(_) if s == "nn" => Ok(Range::Named(s.into())),
            Err(_) => Err(format!("`{s}` is neither a number nor `nn`")),
        }
    }
}

impl Range {
    fn exponent(&self) -> CliResult<Option<f64>> {
        match self {
            Range::Power(x) => Ok(Some(*x)),
            Range::Named(s) if s == "nn" => Ok(None),
            Range::Named(s) => Err(config_err("delta", format!("`{s}` is neither a number nor `nn`"))),
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<WalkMode>,
    /// Linear sizes (comma-separated list sweeps).
    #[arg(long = "L", value_delimiter = ',', num_args = 1..)]
    #[serde(rename = "L")]
    pub num_sites: Option<Vec<usize>>,
    /// Range exponents or `nn` (default).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub delta: Option<Vec<Range>>,
    /// Spatial dimension, 1 or 2.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub kappa: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eta: Option<Vec<f64>>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Start profile for `evolve`: neel, uniform or orbit:<index>.
    #[arg(long)]
    pub initial: Option<String>,
    /// Number of wavenumbers for `dispersion` (default L/64).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Scan intervals for `crossing`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn single<T: Clone>(v: &[T], key: &str) -> CliResult<T> {
    match v {
        [x] => Ok(x.clone()),
        _ => Err(config_err(key, format!("this mode takes one value, got {}", v.len()))),
    }
}

pub fn walk(mut a: WalkArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: WalkArgs = load_toml(&path)?;
        overlay!(a, file; mode, num_sites, delta, d, lambda, kappa, eta, tmax, tmin, per_decade, initial, k_max, steps, out);
    }
    let mode = a.mode.ok_or_else(|| config_err("mode", "required"))?;
    let sizes = a.num_sites.clone().ok_or_else(|| config_err("L", "required"))?;
    let deltas = a
        .delta
        .clone()
        .unwrap_or_else(|| vec![Range::Named("nn".into())])
        .iter()
        .map(Range::exponent)
        .collect::<CliResult<Vec<_>>>()?;
    let dim = a.d.unwrap_or(1);
    let lambda = a.lambda.unwrap_or(1.0);
    let kappas = a.kappa.clone().unwrap_or_else(|| vec![0.0]);
    let etas = a.eta.clone().unwrap_or_else(|| vec![0.0]);
    let prov = Provenance::new("walk", serde_json::to_value(&a)?, None);
    let params = |delta: Option<f64>, kappa: f64, eta: f64| WalkParams { dim, delta, lambda, eta, kappa };

    match mode {
        WalkMode::Tau | WalkMode::Mu => {
            let points = product(&deltas, &sizes, &kappas, &etas);
            let rows = points
                .par_iter()
                .map(|&(delta, l, kappa, eta)| {
                    let p = params(delta, kappa, eta);
                    let tau = build_generator(&p, l)?.smallest_eigenvalue()?;
                    let mu = if mode == WalkMode::Mu { mu_exponent(&p, l)? } else { f64::NAN };
                    Ok(SweepRow { delta: delta.unwrap_or(f64::NAN), num_sites: l, dim, kappa, eta, tau, mu })
                })
                .collect::<ffcontrol::Result<Vec<_>>>()?;
            write_table(&sweep_table(&rows).with_meta("lambda", lambda), &a.out, &prov)
        }
        WalkMode::Evolve => {
            let p = params(single(&deltas, "delta")?, single(&kappas, "kappa")?, single(&etas, "eta")?);
            let gen = build_generator(&p, single(&sizes, "L")?)?;
            let p0 = match a.initial.as_deref().unwrap_or("neel") {
                "neel" => gen.neel_profile()?,
                "uniform" => vec![1.0; gen.dim()],
                s => {
                    let k: usize = s
                        .strip_prefix("orbit:")
                        .and_then(|k| k.parse().ok())
                        .ok_or_else(|| config_err("initial", format!("unknown start profile `{s}`")))?;
                    if k >= gen.dim() {
                        return Err(config_err("initial", format!("orbit {k} out of range ({} orbits)", gen.dim())));
                    }
                    let mut v = vec![0.0; gen.dim()];
                    v[k] = 1.0;
                    v
                }
            };
            let mut times = vec![0.0];
            times.extend(record_grid(a.tmin.unwrap_or(0.1), a.tmax.unwrap_or(100.0), a.per_decade.unwrap_or(30))?);
            let run = gen.evolve(&p0, &times)?;
            let table = walk_table(&gen, &run)
                .with_meta("delta", p.delta.map_or("nn".to_string(), |x| x.to_string()))
                .with_meta("kappa", p.kappa)
                .with_meta("eta", p.eta)
                .with_meta("lambda", p.lambda);
            write_table(&table, &a.out, &prov)
        }
        WalkMode::Stationary => {
            let p = params(single(&deltas, "delta")?, single(&kappas, "kappa")?, single(&etas, "eta")?);
            let gen = build_generator(&p, single(&sizes, "L")?)?;
            let x = gen.stationary_noisy()?;
            let mut cols: Vec<String> = if dim == 1 { vec!["r".into()] } else { vec!["a".into(), "b".into()] };
            cols.extend(["orbit_size".to_string(), "P".to_string()]);
            let mut t = Table::new(cols).with_meta("L", gen.num_sites()).with_meta("eta", p.eta);
            for (i, r) in gen.representatives().iter().enumerate() {
                let mut row: Vec<f64> = r.iter().map(|&c| c as f64).collect();
                row.extend([gen.orbit_sizes()[i] as f64, x[i]]);
                t.push(row)?;
            }
            write_table(&t, &a.out, &prov)
        }
        WalkMode::Dispersion => {
            let points = product(&deltas, &sizes, &[()], &[()]);
            let fits = points
                .par_iter()
                .map(|&(delta, l, _, _)| {
                    let delta = delta.ok_or_else(|| config_err("delta", "dispersion needs a numeric range exponent"))?;
                    Ok(dispersion_asymptotics(delta, l, a.k_max)?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            write_json(&serde_json::to_value(fits)?, &a.out, &prov)
        }
        WalkMode::Crossing => {
            let (small, large) = match sizes[..] {
                [s, l] if s < l => (s, l),
                _ => return Err(config_err("L", "crossing takes two increasing sizes")),
            };
            let (lo, hi) = match deltas[..] {
                [Some(lo), Some(hi)] if lo < hi => (lo, hi),
                [] => (1.0, 4.0),
                _ => return Err(config_err("delta", "crossing takes a search interval lo,hi")),
            };
            let dc = mu_crossing(dim, small, large, lo, hi, a.steps.unwrap_or(12))?;
            write_json(&json!({ "d": dim, "L": [small, large], "delta_c": dc }), &a.out, &prov)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    /// Power law `t^{-1/z}` on a window of one curve.
    Power,
    /// Exponential tails of several sizes, `t_c ∝ L^z`.
    Collapse,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV files (trajectory, oracle or walk output).
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// Sizes of the inputs (default: the `L` metadata of each file).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub method: Option<FitKind>,
    /// Column to fit (default `mean_P`, or `sum_P` for walk files).
    #[arg(long)]
    pub column: Option<String>,
    /// Power-law window.
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Tail starts below this fraction of the peak.
    #[arg(long)]
    pub upper: Option<f64>,
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub min_points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    Table::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn meta_size(t: &Table, path: &Path) -> CliResult<usize> {
    t.meta("L")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| config_err("sizes", format!("{} has no `L` metadata; pass --sizes", path.display())))
}

fn series_of(t: &Table, column: Option<&str>) -> CliResult<Series> {
    let name = column.unwrap_or(if t.has_column("mean_P") { "mean_P" } else { "sum_P" });
    let errors = if name == "mean_P" && t.has_column("stderr_P") { Some(t.column("stderr_P")?) } else { None };
    Ok(Series::new(t.column("time")?, t.column(name)?, errors)?)
}

pub fn fit(mut a: FitArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: FitArgs = load_toml(&path)?;
        overlay!(a, file; inputs, sizes, method, column, tmin, tmax, upper, floor, min_points, out);
    }
    let inputs = a.inputs.clone().filter(|v| !v.is_empty()).ok_or_else(|| config_err("input", "required"))?;
    let tables = inputs.iter().map(|p| read_table(p)).collect::<CliResult<Vec<_>>>()?;
    let prov = Provenance::new("fit", serde_json::to_value(&a)?, None);
    let method = a.method.unwrap_or(if inputs.len() > 1 { FitKind::Collapse } else { FitKind::Power });
    let result = match method {
        FitKind::Power => {
            let t = match &tables[..] {
                [t] => t,
                _ => return Err(config_err("input", "a power-law fit takes one curve")),
            };
            let s = series_of(t, a.column.as_deref())?;
            let hi = a.tmax.unwrap_or(s.times[s.times.len() - 1]);
            let mut r = fit_power_law(&s, (a.tmin.unwrap_or(1.0), hi))?;
            if let Ok(l) = meta_size(t, &inputs[0]) {
                r.sizes = vec![l];
            }
            r
        }
        FitKind::Collapse => {
            let sizes = match &a.sizes {
                Some(s) if s.len() == tables.len() => s.clone(),
                Some(s) => return Err(config_err("sizes", format!("{} sizes for {} inputs", s.len(), tables.len()))),
                None => tables.iter().zip(&inputs).map(|(t, p)| meta_size(t, p)).collect::<CliResult<_>>()?,
            };
            let curves = sizes
                .iter()
                .zip(&tables)
                .map(|(&l, t)| Ok((l, series_of(t, a.column.as_deref())?)))
                .collect::<CliResult<Vec<_>>>()?;
            let d = TailWindow::default();
            let tail = TailWindow {
                upper: a.upper.unwrap_or(d.upper),
                floor: a.floor.unwrap_or(d.floor),
                min_points: a.min_points.unwrap_or(d.min_points),
            };
            fit_cutoff_collapse(&curves, &tail)?
        }
    };
    write_json(&serde_json::to_value(&result)?, &a.out, &prov)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Trajectory or oracle CSV; its bond sum is `L·mean_P`.
    #[arg(long)]
    pub quantum: Option<PathBuf>,
    /// Reference CSV, interpolated onto the quantum times (walk files use `P_1`).
    #[arg(long)]
    pub walk: Option<PathBuf>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Nearest-neighbour bond sum `Σ_ℓ⟨P_{ℓ,ℓ+1}⟩` of an ensemble or walk file.
fn bond_sum(t: &Table, path: &Path) -> CliResult<Vec<f64>> {
    if t.has_column("mean_P") {
        let l = meta_size(t, path)? as f64;
        Ok(t.column("mean_P")?.iter().map(|m| l * m).collect())
    } else if t.has_column("P_1") {
        Ok(t.column("P_1")?)
    } else {
        Err(Failure::Config(format!("{}: neither a `mean_P` nor a `P_1` column", path.display())))
    }
}

/// Linear interpolation of `(xs, ys)` at `x`; `None` outside the sampled range.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let tol = 1e-12 * x.abs().max(1.0);
    if xs.is_empty() || x < xs[0] - tol || x > xs[xs.len() - 1] + tol {
        return None;
    }
    let k = xs.partition_point(|&v| v < x);
    if k < xs.len() && (xs[k] - x).abs() <= tol {
        return Some(ys[k]);
    }
    if k == 0 {
        return Some(ys[0]);
    }
    if k == xs.len() {
        return Some(ys[xs.len() - 1]);
    }
    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    Some(ys[k - 1] + w * (ys[k] - ys[k - 1]))
}

pub fn compare(mut a: CompareArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: CompareArgs = load_toml(&path)?;
        overlay!(a, file; quantum, walk, tmin, tmax, out);
    }
    let qp = a.quantum.clone().ok_or_else(|| config_err("quantum", "required"))?;
    let wp = a.walk.clone().ok_or_else(|| config_err("walk", "required"))?;
    let (qt, wt) = (read_table(&qp)?, read_table(&wp)?);
    let (q, w) = (bond_sum(&qt, &qp)?, bond_sum(&wt, &wp)?);
    let (q_times, w_times) = (qt.column("time")?, wt.column("time")?);
    let (lo, hi) = (a.tmin.unwrap_or(0.0), a.tmax.unwrap_or(f64::INFINITY));
    let mut devs = Vec::new();
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for (i, &t) in q_times.iter().enumerate() {
        if t < lo || t > hi {
            continue;
        }
        let r = interpolate(&w_times, &w, t).ok_or_else(|| {
            Failure::Config(format!("grid mismatch: t = {t} lies outside the reference range of {}", wp.display()))
        })?;
        let dev = if q[i] == r { 0.0 } else { (q[i] - r).abs() / r.abs() };
        if dev > worst.0 || worst.1.is_nan() {
            worst = (dev, t);
        }
        devs.push(dev);
    }
    if devs.is_empty() {
        return Err(config_err("tmin", format!("no quantum record times in [{lo}, {hi}]")));
    }
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    let prov = Provenance::new("compare", serde_json::to_value(&a)?, None);
    let report = json!({ "points": devs.len(), "max_rel": worst.0, "t_at_max": worst.1, "mean_rel": mean });
    write_json(&report, &a.out, &prov)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// dicke:<up>, anomalous_fredkin, fredkin_stationary or motzkin_ground_pbc.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub num_sites: Option<usize>,
    /// Write the amplitudes here (`index re im` lines).
    #[arg(long)]
    pub amplitudes: Option<PathBuf>,
    /// JSON report (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn target(mut a: TargetArgs) -> CliResult<()> {
    if let Some(path) = a.config.take() {
        let mut file: TargetArgs = load_toml(&path)?;
        overlay!(a, file; kind, num_sites, amplitudes, out);
    }
    let kind = parse_target(a.kind.as_deref().ok_or_else(|| config_err("kind", "required"))?)?;
    let l = a.num_sites.ok_or_else(|| config_err("L", "required"))?;
    let target = target_state(kind, l)?;
    let state = &target.state;
    let entropies = (1..l).map(|c| state.schmidt_entropy(c)).collect::<ffcontrol::Result<Vec<_>>>()?;
    let mut report = json!({
        "kind": kind,
        "L": l,
        "norm": state.norm(),
        "entropy": entropies,
        "half_chain_entropy": entropies[l / 2 - 1],
        "sz": state.total_sz(),
    });
    match kind {
        TargetKind::Dicke { up } => {
            report["dicke_formula"] = json!(dicke_entropy(l, up, l / 2));
            report["max_projector"] = json!(max_projector_expectation(&ProtocolSpec::new(Family::SwapSu(2), l), state)?);
        }
        TargetKind::AnomalousFredkin | TargetKind::FredkinStationary => {
            report["fredkin_residual"] = json!(fredkin_residual(state)?);
            report["max_projector"] = json!(max_projector_expectation(&ProtocolSpec::new(Family::Fredkin, l), state)?);
        }
        TargetKind::MotzkinGroundPbc => {
            report["max_projector"] = json!(max_projector_expectation(&ProtocolSpec::new(Family::Motzkin, l), state)?);
        }
    }
    let prov = Provenance::new("target", serde_json::to_value(&a)?, None);
    if let Some(path) = &a.amplitudes {
        let mut buf = Vec::new();
        state.write_amplitudes(&mut buf)?;
        fs::write(path, buf)?;
        write_sidecar(path, &prov)?;
    }
    write_json(&report, &a.out, &prov)
}
