//! Continuous-time stochastic unraveling of the controlled dynamics.
//!
//! Measurements fire at rate 1 per label and scrambling gates at rate `κ`
//! per bond, so the total event rate is `L(1+κ)`. Waiting times are
//! exponential and observables are sampled on a fixed time grid.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{swap_matrix, C64};
use crate::protocols::{error_probability, Family, LongRangeSampler, MeasurementStep, ProtocolSpec};
use crate::sector::{CompiledOp, EntropyTable, GroupTable, Sector};
use crate::state::{LocalOperator, OpKind, QuditState};

/// Probabilities below this count as an exactly absorbed trajectory.
pub const DEFAULT_ABSORB_TOL: f64 = 1e-14;
const COLLAPSE_FLOOR: f64 = 1e-14;

fn default_true() -> bool {
    true
}

fn default_absorb() -> f64 {
    DEFAULT_ABSORB_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub protocol: ProtocolSpec,
    pub t_max: f64,
    /// Record times in `(0, t_max]`; `None` selects [`log_grid`] with 30 points per decade.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_grid: Option<Vec<f64>>,
    pub master_seed: u64,
    #[serde(default)]
    pub trajectory_index: u64,
    #[serde(default = "default_true")]
    pub record_entropy: bool,
    #[serde(default = "default_true")]
    pub record_j2: bool,
    /// Stop a noiseless trajectory once its order parameter falls below this; 0 disables.
    #[serde(default = "default_absorb")]
    pub absorb_tol: f64,
    /// Evolve only the charge sector of the initial state.
    #[serde(default = "default_true")]
    pub restrict_sector: bool,
}

impl TrajectoryConfig {
    pub fn new(protocol: ProtocolSpec, t_max: f64, master_seed: u64) -> Self {
        TrajectoryConfig {
            protocol,
            t_max,
            record_grid: None,
            master_seed,
            trajectory_index: 0,
            record_entropy: true,
            record_j2: true,
            absorb_tol: DEFAULT_ABSORB_TOL,
            restrict_sector: true,
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config("t_max", format!("need a positive finite time, got {}", self.t_max)));
        }
        let grid = match &self.record_grid {
            Some(g) => g.clone(),
            None => log_grid(0.1, self.t_max, 30),
        };
        if grid.is_empty() {
            return Err(Error::config("record_grid", "empty record grid"));
        }
        for w in grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::config("record_grid", "record times must increase strictly"));
            }
        }
        if !(grid[0] > 0.0) || grid[grid.len() - 1] > self.t_max {
            return Err(Error::config("record_grid", format!("record times must lie in (0, {}]", self.t_max)));
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.grid()?;
        if !(self.absorb_tol >= 0.0) {
            return Err(Error::config("absorb_tol", "must be ≥ 0"));
        }
        Ok(())
    }
}

/// Logarithmic grid from `t_min` to `t_max` with `per_decade` points per decade; `t_max` is always the last point.
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    if t_max <= t_min {
        return vec![t_max];
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|k| t_min * 10f64.powf(k as f64 / per_decade as f64)).collect();
    if g[g.len() - 1] < t_max * (1.0 - 1e-12) {
        g.push(t_max);
    } else {
        let last = g.len() - 1;
        g[last] = t_max;
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// `(1/L)Σ_α⟨P_α⟩` over the nearest-neighbour labels.
    pub order_param: Vec<f64>,
    /// Half-chain entanglement entropy (nats).
    pub entropy: Option<Vec<f64>>,
    pub sz: Vec<f64>,
    pub j2: Option<Vec<f64>>,
    /// Events executed before each record time.
    pub events: Vec<u64>,
}

#[derive(Clone, Debug)]
struct CompiledStep {
    proj_table: Arc<GroupTable>,
    proj: CompiledOp,
    comp: CompiledOp,
    fb_table: Arc<GroupTable>,
    feedback: CompiledOp,
}

/// A protocol compiled onto one charge sector; shared read-only by all trajectories.
#[derive(Debug)]
pub struct Engine {
    spec: ProtocolSpec,
    sector: Sector,
    initial: Vec<C64>,
    channels: Vec<Vec<CompiledStep>>,
    sampler: Option<LongRangeSampler>,
    order_ops: Vec<(Arc<GroupTable>, CompiledOp)>,
    swaps: Vec<(Arc<GroupTable>, CompiledOp)>,
    entropy: Option<EntropyTable>,
}

struct TableCache<'a> {
    sector: &'a Sector,
    tables: HashMap<Vec<usize>, Arc<GroupTable>>,
}

impl TableCache<'_> {
    fn get(&mut self, support: &[usize]) -> Result<Arc<GroupTable>> {
        if let Some(t) = self.tables.get(support) {
            return Ok(t.clone());
        }
        let t = Arc::new(self.sector.table(support)?);
        self.tables.insert(support.to_vec(), t.clone());
        Ok(t)
    }

    fn compile(&mut self, op: &LocalOperator) -> Result<(Arc<GroupTable>, CompiledOp)> {
        let t = self.get(op.support())?;
        let c = self.sector.compile(op, &t)?;
        Ok((t, c))
    }

    fn step(&mut self, s: &MeasurementStep) -> Result<CompiledStep> {
        let (proj_table, proj) = self.compile(&s.projector)?;
        let (_, comp) = self.compile(&s.projector.complement()?)?;
        let (fb_table, feedback) = self.compile(&s.feedback)?;
        Ok(CompiledStep { proj_table, proj, comp, fb_table, feedback })
    }
}

impl Engine {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.protocol.clone();
        let l = spec.num_sites;
        let n = spec.local_dim();
        let init_state = spec.initial_state()?;
        let charge = if cfg.restrict_sector {
            let q = 2.0 * init_state.total_sz();
            Some(q.round() as i64)
        } else {
            None
        };
        let sector = Sector::new(l, n, charge)?;
        let initial = sector.compress(&init_state)?;
        let mut cache = TableCache { sector: &sector, tables: HashMap::new() };
        let (channels, sampler) = match spec.delta {
            None => {
                let mut ch = Vec::with_capacity(l);
                for label in 0..l {
                    let steps = spec.channel(label)?;
                    ch.push(steps.iter().map(|s| cache.step(s)).collect::<Result<Vec<_>>>()?);
                }
                (ch, None)
            }
            Some(delta) => {
                let mut ch = Vec::with_capacity(l * l);
                for a in 0..l {
                    for b in 0..l {
                        if a == b {
                            ch.push(Vec::new());
                            continue;
                        }
                        let steps = spec.pair_channel(a, b)?;
                        ch.push(steps.iter().map(|s| cache.step(s)).collect::<Result<Vec<_>>>()?);
                    }
                }
                (ch, Some(LongRangeSampler::new(l, delta)?))
            }
        };
        let order_ops = spec.order_param_projectors()?.iter().map(|p| cache.compile(p)).collect::<Result<Vec<_>>>()?;
        let swaps = if spec.kappa > 0.0 {
            (0..l)
                .map(|b| {
                    let op = LocalOperator::new(vec![b, (b + 1) % l], n, swap_matrix(n), OpKind::Unitary)?;
                    cache.compile(&op)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let entropy = if cfg.record_entropy { Some(sector.entropy_table(l / 2)?) } else { None };
        Ok(Engine { spec, sector, initial, channels, sampler, order_ops, swaps, entropy })
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn initial(&self) -> &[C64] {
        &self.initial
    }

    /// `(1/L)Σ_α⟨P_α⟩`.
    pub fn order_param(&self, amps: &[C64]) -> f64 {
        let s: f64 = self.order_ops.iter().map(|(t, c)| c.expectation(t, amps).re).sum();
        s / self.order_ops.len() as f64
    }

    fn measure(&self, step: &CompiledStep, amps: &mut [C64], rng: &mut ChaCha8Rng) -> Result<()> {
        let p = step.proj.expectation(&step.proj_table, amps).re;
        if !(-1e-10..=1.0 + 1e-10).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        let fired = rng.random::<f64>() < p;
        let op = if fired { &step.proj } else { &step.comp };
        let norm = op.apply_normalized(&step.proj_table, amps, COLLAPSE_FLOOR);
        if norm < COLLAPSE_FLOOR {
            return Err(Error::NullCollapse(norm));
        }
        let eta = self.spec.eta;
        let correct = if eta > 0.0 {
            let misread = rng.random::<f64>() < error_probability(eta);
            fired != misread
        } else {
            fired
        };
        if correct {
            step.feedback.apply(&step.fb_table, amps);
        }
        Ok(())
    }

    fn scramble(&self, amps: &mut [C64], rng: &mut ChaCha8Rng) {
        let bond = rng.random_range(0..self.swaps.len());
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let (t, s) = &self.swaps[bond];
        let mut sw = amps.to_vec();
        s.apply(t, &mut sw);
        let c = C64::new(phi.cos(), 0.0);
        let is = C64::new(0.0, phi.sin());
        for (a, b) in amps.iter_mut().zip(sw) {
            *a = c * *a + is * b;
        }
    }

    fn event(&self, amps: &mut [C64], rng: &mut ChaCha8Rng) -> Result<()> {
        let kappa = self.spec.kappa;
        if kappa > 0.0 && rng.random::<f64>() * (1.0 + kappa) >= 1.0 {
            self.scramble(amps, rng);
            return Ok(());
        }
        let l = self.spec.num_sites;
        let idx = match &self.sampler {
            Some(s) => {
                let (a, b) = s.sample(rng);
                a * l + b
            }
            None => rng.random_range(0..l),
        };
        for step in &self.channels[idx] {
            self.measure(step, amps, rng)?;
        }
        Ok(())
    }

    fn rng(master_seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        rng
    }

    /// One trajectory; returns the recorded series and the final sector amplitudes.
    pub fn run_with_state(&self, cfg: &TrajectoryConfig, index: u64) -> Result<(TimeSeries, Vec<C64>)> {
        let grid = cfg.grid()?;
        let mut rng = Self::rng(cfg.master_seed, index);
        let l = self.spec.num_sites;
        let rate = l as f64 * (1.0 + self.spec.kappa);
        let want_j2 = cfg.record_j2 && self.spec.family == Family::SwapSu(2);
        let mut ts = TimeSeries {
            times: grid.clone(),
            order_param: Vec::with_capacity(grid.len()),
            entropy: self.entropy.as_ref().map(|_| Vec::with_capacity(grid.len())),
            sz: Vec::with_capacity(grid.len()),
            j2: want_j2.then(|| Vec::with_capacity(grid.len())),
            events: Vec::with_capacity(grid.len()),
        };
        let mut amps = self.initial.clone();
        let mut t = 0.0;
        let mut events = 0u64;
        let mut next = 0usize;
        let absorb = self.spec.eta == 0.0 && cfg.absorb_tol > 0.0;
        'run: loop {
            let u: f64 = rng.random();
            let t_new = t - (1.0 - u).ln() / rate;
            while next < grid.len() && grid[next] < t_new {
                let op = self.order_param(&amps);
                let ent = self.entropy.as_ref().map(|e| e.entropy(&amps));
                let sz = self.sector.total_sz(&amps);
                let j2 = if want_j2 { Some(self.sector.total_spin_squared(&amps)?) } else { None };
                let frozen = absorb && op < cfg.absorb_tol;
                let reps = if frozen { grid.len() - next } else { 1 };
                for _ in 0..reps {
                    ts.order_param.push(op);
                    if let (Some(v), Some(e)) = (ts.entropy.as_mut(), ent) {
                        v.push(e);
                    }
                    ts.sz.push(sz);
                    if let (Some(v), Some(j)) = (ts.j2.as_mut(), j2) {
                        v.push(j);
                    }
                    ts.events.push(events);
                }
                next += reps;
                if frozen {
                    break 'run;
                }
            }
            if next == grid.len() {
                break;
            }
            t = t_new;
            self.event(&mut amps, &mut rng)?;
            events += 1;
        }
        Ok((ts, amps))
    }

    pub fn run(&self, cfg: &TrajectoryConfig, index: u64) -> Result<TimeSeries> {
        Ok(self.run_with_state(cfg, index)?.0)
    }

    /// Final state of a trajectory as a dense vector.
    pub fn expand(&self, amps: &[C64]) -> Result<QuditState> {
        self.sector.expand(amps)
    }

    /// Runs `n_traj` trajectories with indices `0..n_traj` and reduces them in
    /// index order, so the result does not depend on the worker count.
    /// `each` sees every trajectory, also in index order.
    pub fn ensemble(
        &self,
        cfg: &TrajectoryConfig,
        n_traj: usize,
        mut each: Option<&mut dyn FnMut(u64, &TimeSeries)>,
    ) -> Result<EnsembleStats> {
        if n_traj == 0 {
            return Err(Error::config("traj", "need at least one trajectory"));
        }
        let grid = cfg.grid()?;
        let mut acc = Accumulator::new(grid.len());
        const CHUNK: usize = 256;
        let mut start = 0;
        while start < n_traj {
            let end = (start + CHUNK).min(n_traj);
            let batch: Vec<Result<TimeSeries>> =
                (start..end).into_par_iter().map(|i| self.run(cfg, i as u64)).collect();
            for (k, ts) in batch.into_iter().enumerate() {
                let ts = ts?;
                if let Some(f) = each.as_mut() {
                    f((start + k) as u64, &ts);
                }
                acc.push(&ts);
            }
            start = end;
        }
        Ok(acc.finish(grid))
    }
}

/// Runs a single trajectory described by `cfg` (index `cfg.trajectory_index`).
pub fn run_trajectory(cfg: &TrajectoryConfig) -> Result<TimeSeries> {
    Engine::new(cfg)?.run(cfg, cfg.trajectory_index)
}

/// Runs `n_traj` trajectories of `cfg` in parallel.
pub fn run_ensemble(cfg: &TrajectoryConfig, n_traj: usize) -> Result<EnsembleStats> {
    Engine::new(cfg)?.ensemble(cfg, n_traj, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population variance of the per-trajectory order parameter.
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
    pub mean_entropy: Option<Vec<f64>>,
    pub mean_sz: Vec<f64>,
    pub mean_j2: Option<Vec<f64>>,
}

/// Streaming mean/variance over trajectories (Welford).
#[derive(Clone, Debug)]
pub struct Accumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    entropy: Option<Vec<f64>>,
    sz: Vec<f64>,
    j2: Option<Vec<f64>>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Accumulator { n: 0, mean: vec![0.0; len], m2: vec![0.0; len], entropy: None, sz: vec![0.0; len], j2: None }
    }

    pub fn push(&mut self, ts: &TimeSeries) {
        self.n += 1;
        let n = self.n as f64;
        for (i, &x) in ts.order_param.iter().enumerate() {
            let d = x - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x - self.mean[i]);
        }
        let running = |acc: &mut Vec<f64>, xs: &[f64]| {
            for (a, &x) in acc.iter_mut().zip(xs) {
                *a += (x - *a) / n;
            }
        };
        running(&mut self.sz, &ts.sz);
        if let Some(e) = &ts.entropy {
            running(self.entropy.get_or_insert_with(|| vec![0.0; e.len()]), e);
        }
        if let Some(j) = &ts.j2 {
            running(self.j2.get_or_insert_with(|| vec![0.0; j.len()]), j);
        }
    }

    pub fn finish(self, times: Vec<f64>) -> EnsembleStats {
        let n = self.n.max(1) as f64;
        let variance: Vec<f64> = self.m2.iter().map(|m| (m / n).max(0.0)).collect();
        let stderr = variance.iter().map(|v| (v / n).sqrt()).collect();
        EnsembleStats {
            times,
            mean: self.mean,
            variance,
            stderr,
            n_traj: self.n,
            mean_entropy: self.entropy,
            mean_sz: self.sz,
            mean_j2: self.j2,
        }
    }
}
