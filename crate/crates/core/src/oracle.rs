//! Exact density-matrix evolution of the trajectory-averaged dynamics for
//! small chains.
//!
//! The generator is `Σ_c r_c (E_c(ρ) − ρ) − (κ/4) Σ_b [S_b,[S_b,ρ]]` where
//! `E_c` is the measure-and-correct map of channel `c`,
//! `ρ ↦ (1−ε)(VPρPV† + QρQ) + ε(PρP + VQρQV†)` with `Q = 1 − P` and `ε`
//! the misreading probability, composed over the steps of the channel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{identity, max_abs, swap_matrix, CMatrix, C64, ONE};
use crate::protocols::{error_probability, long_range_rates, ProtocolSpec};
use crate::state::{apply_dense, LocalOperator, OpKind, QuditState, Stencil};
use crate::trajectory::EnsembleStats;

pub const MAX_DT: f64 = 0.05;
const TRACE_FAIL: f64 = 1e-8;
const TRACE_RENORM: f64 = 1e-12;

/// Mixed state of an `L`-site chain.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_sites: usize,
    local_dim: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(num_sites: usize, local_dim: usize, matrix: CMatrix) -> Result<Self> {
        let dim = local_dim.pow(num_sites as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!("need a {dim}x{dim} density matrix")));
        }
        let herm = max_abs(&(matrix.adjoint() - &matrix));
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::Numerical(format!("density matrix has trace {tr}")));
        }
        Ok(DensityMatrix { num_sites, local_dim, matrix })
    }

    pub fn from_state(state: &QuditState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        DensityMatrix { num_sites: state.num_sites(), local_dim: state.local_dim(), matrix: &v * v.adjoint() }
    }

    pub fn maximally_mixed(num_sites: usize, local_dim: usize) -> Self {
        let dim = local_dim.pow(num_sites as u32);
        DensityMatrix { num_sites, local_dim, matrix: identity(dim) * C64::new(1.0 / dim as f64, 0.0) }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `tr(ρS^z_tot)`.
    pub fn total_sz(&self) -> f64 {
        let (l, n) = (self.num_sites, self.local_dim);
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].re * 0.5 * crate::state::charge2_of_index(n, l, i) as f64)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `tr(ρO)` for a local operator.
    pub fn expectation(&self, op: &LocalOperator) -> Result<C64> {
        let mut m = self.matrix.clone();
        left_apply(&mut m, self.num_sites, self.local_dim, op);
        Ok(m.trace())
    }
}

/// `X ← OX` with `O` local.
fn left_apply(x: &mut CMatrix, num_sites: usize, n: usize, op: &LocalOperator) {
    let st = Stencil::new(num_sites, n, op.support());
    let dim = x.nrows();
    for col in x.as_mut_slice().chunks_mut(dim) {
        apply_dense(col, &st, op.matrix());
    }
}

/// `X ← XO†` with `O` local.
fn right_apply_adjoint(x: &mut CMatrix, num_sites: usize, n: usize, op: &LocalOperator) {
    let st = Stencil::new(num_sites, n, op.support());
    let conj = op.matrix().map(|z| z.conj());
    let mut t = x.transpose();
    let dim = t.nrows();
    for col in t.as_mut_slice().chunks_mut(dim) {
        apply_dense(col, &st, &conj);
    }
    *x = t.transpose();
}

fn sandwich(x: &CMatrix, num_sites: usize, n: usize, a: &LocalOperator, b: &LocalOperator) -> CMatrix {
    let mut y = x.clone();
    left_apply(&mut y, num_sites, n, a);
    right_apply_adjoint(&mut y, num_sites, n, b);
    y
}

#[derive(Clone, Debug)]
struct StepOps {
    p: LocalOperator,
    q: LocalOperator,
    v: LocalOperator,
}

/// The averaged dynamics of one protocol.
#[derive(Clone, Debug)]
pub struct Oracle {
    spec: ProtocolSpec,
    channels: Vec<(f64, Vec<StepOps>)>,
    swaps: Vec<LocalOperator>,
    order: Vec<LocalOperator>,
    misread: f64,
}

impl Oracle {
    pub fn new(spec: &ProtocolSpec) -> Result<Self> {
        spec.validate()?;
        let l = spec.num_sites;
        let n = spec.local_dim();
        let max_l = if n == 2 { 8 } else { 5 };
        if l > max_l {
            return Err(Error::config("L", format!("exact evolution is limited to {max_l} sites for N = {n}")));
        }
        let to_ops = |steps: Vec<crate::protocols::MeasurementStep>| -> Result<Vec<StepOps>> {
            steps
                .into_iter()
                .map(|s| Ok(StepOps { q: s.projector.complement()?, p: s.projector, v: s.feedback }))
                .collect()
        };
        let mut channels = Vec::new();
        match spec.delta {
            None => {
                for label in 0..l {
                    channels.push((1.0, to_ops(spec.channel(label)?)?));
                }
            }
            Some(delta) => {
                let g = long_range_rates(l, delta);
                for a in 0..l {
                    for b in 0..l {
                        if a != b {
                            let r = (b + l - a) % l;
                            channels.push((g[r], to_ops(spec.pair_channel(a, b)?)?));
                        }
                    }
                }
            }
        }
        let swaps = if spec.kappa > 0.0 {
            (0..l)
                .map(|b| LocalOperator::new(vec![b, (b + 1) % l], n, swap_matrix(n), OpKind::Unitary))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Oracle {
            spec: spec.clone(),
            channels,
            swaps,
            order: spec.order_param_projectors()?,
            misread: error_probability(spec.eta),
        })
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    fn shape(&self) -> (usize, usize) {
        (self.spec.num_sites, self.spec.local_dim())
    }

    fn step_map(&self, x: &CMatrix, s: &StepOps) -> CMatrix {
        let (l, n) = self.shape();
        let pp = sandwich(x, l, n, &s.p, &s.p);
        let qq = sandwich(x, l, n, &s.q, &s.q);
        let vpp = sandwich(&pp, l, n, &s.v, &s.v);
        let eps = self.misread;
        if eps == 0.0 {
            return vpp + qq;
        }
        let vqq = sandwich(&qq, l, n, &s.v, &s.v);
        (vpp + &qq) * C64::new(1.0 - eps, 0.0) + (pp + vqq) * C64::new(eps, 0.0)
    }

    /// Generator applied to an arbitrary (not necessarily physical) matrix.
    pub fn lindbladian(&self, x: &CMatrix) -> CMatrix {
        let (l, n) = self.shape();
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (rate, steps) in &self.channels {
            if *rate == 0.0 {
                continue;
            }
            let mut y = x.clone();
            for s in steps {
                y = self.step_map(&y, s);
            }
            out += (y - x) * C64::new(*rate, 0.0);
        }
        let half_kappa = 0.5 * self.spec.kappa;
        for s in &self.swaps {
            let sxs = sandwich(x, l, n, s, s);
            out += (sxs - x) * C64::new(half_kappa, 0.0);
        }
        out
    }

    fn total_rate(&self) -> f64 {
        self.channels.iter().map(|c| c.0).sum::<f64>() + self.spec.kappa * self.swaps.len() as f64
    }

    /// Default step: `min(0.05, 1/Σrates)`.
    pub fn default_dt(&self) -> f64 {
        MAX_DT.min(1.0 / self.total_rate().max(1e-12))
    }

    fn rk4(&self, x: &CMatrix, dt: f64) -> CMatrix {
        let h = C64::new(dt, 0.0);
        let half = C64::new(0.5 * dt, 0.0);
        let k1 = self.lindbladian(x);
        let k2 = self.lindbladian(&(x + &k1 * half));
        let k3 = self.lindbladian(&(x + &k2 * half));
        let k4 = self.lindbladian(&(x + &k3 * h));
        x + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }

    /// One RK4 step; returns the new state and the trace drift that was
    /// removed (zero unless it exceeded 1e-12).
    pub fn channel_step(&self, rho: &DensityMatrix, dt: f64) -> Result<(DensityMatrix, f64)> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::config("dt", format!("need 0 < dt ≤ {MAX_DT}, got {dt}")));
        }
        let mut m = self.rk4(&rho.matrix, dt);
        let drift = m.trace().re - 1.0;
        if drift.abs() > TRACE_FAIL {
            return Err(Error::Numerical(format!("trace drift {drift:.3e} in one step; reduce dt")));
        }
        let removed = if drift.abs() > TRACE_RENORM {
            m /= C64::new(1.0 + drift, 0.0);
            drift
        } else {
            0.0
        };
        // keep exact hermiticity
        let adj = m.adjoint();
        m = (m + adj) * C64::new(0.5, 0.0);
        Ok((DensityMatrix { matrix: m, ..rho.clone() }, removed))
    }

    /// `(1/L)Σ_α tr(ρP_α)`.
    pub fn order_param(&self, rho: &DensityMatrix) -> f64 {
        let s: f64 = self.order.iter().map(|p| rho.expectation(p).map(|z| z.re).unwrap_or(f64::NAN)).sum();
        s / self.order.len() as f64
    }

    /// Evolves `rho0` and records on `times` (steps land exactly on each record time).
    pub fn evolve(&self, rho0: &DensityMatrix, times: &[f64]) -> Result<OracleRun> {
        let dt_max = self.default_dt();
        let mut rho = rho0.clone();
        let mut t = 0.0;
        let mut run = OracleRun {
            times: times.to_vec(),
            order_param: Vec::new(),
            sz: Vec::new(),
            renormalizations: 0,
            max_drift: 0.0,
            min_eigenvalue: f64::INFINITY,
        };
        for &target in times {
            if target < t {
                return Err(Error::config("record_grid", "record times must increase"));
            }
            let span = target - t;
            let steps = (span / dt_max).ceil() as usize;
            for _ in 0..steps {
                let (next, drift) = self.channel_step(&rho, span / steps as f64)?;
                if drift != 0.0 {
                    run.renormalizations += 1;
                    run.max_drift = run.max_drift.max(drift.abs());
                }
                rho = next;
            }
            t = target;
            run.order_param.push(self.order_param(&rho));
            run.sz.push(rho.total_sz());
            if self.spec.num_sites <= 6 {
                run.min_eigenvalue = run.min_eigenvalue.min(rho.min_eigenvalue());
            }
        }
        Ok(run)
    }

    /// `d⟨B⟩/dt = Σ_c r_c ⟨P(V†BV − B)P − [P,[P,B]]⟩ − (κ/4)Σ_b⟨[S_b,[S_b,B]]⟩`
    /// for noiseless single-step channels.
    pub fn heisenberg_rate(&self, rho: &DensityMatrix, b: &LocalOperator) -> Result<f64> {
        if self.spec.eta != 0.0 || self.channels.iter().any(|c| c.1.len() != 1) {
            return Err(Error::config("eta", "the closed rate formula covers noiseless single-step channels"));
        }
        let l = self.spec.num_sites;
        let bm = b.embed(l)?;
        let mut rate = 0.0;
        for (r, steps) in &self.channels {
            let s = &steps[0];
            let p = s.p.embed(l)?;
            let v = s.v.embed(l)?;
            let inner = v.adjoint() * &bm * &v - &bm;
            let pb = &p * &bm - &bm * &p;
            let dc = &p * &pb - &pb * &p;
            let h = &p * inner * &p - dc;
            rate += r * (&rho.matrix * h).trace().re;
        }
        for s in &self.swaps {
            let sm = s.embed(l)?;
            let sb = &sm * &bm - &bm * &sm;
            let dc = &sm * &sb - &sb * &sm;
            rate -= 0.25 * self.spec.kappa * (&rho.matrix * dc).trace().re;
        }
        Ok(rate)
    }

    /// Full superoperator in the column-stacking convention `vec(ρ)_{i + d·j} = ρ_{ij}`.
    pub fn liouvillian_matrix(&self) -> Result<CMatrix> {
        let (l, n) = self.shape();
        if n.pow(l as u32) > 16 {
            return Err(Error::config("L", "the dense superoperator is built for at most 16 basis states"));
        }
        let d = n.pow(l as u32);
        let mut sup = CMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                let out = self.lindbladian(&e);
                for (k, z) in out.as_slice().iter().enumerate() {
                    sup[(k, i + d * j)] = *z;
                }
            }
        }
        Ok(sup)
    }

    /// `exp(tℒ)ρ` through the dense superoperator.
    pub fn propagate_exact(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let sup = self.liouvillian_matrix()? * C64::new(t, 0.0);
        let prop = sup.exp();
        let d = rho0.matrix.nrows();
        let v = nalgebra::DVector::from_column_slice(rho0.matrix.as_slice());
        let out = prop * v;
        Ok(DensityMatrix { matrix: DMatrix::from_column_slice(d, d, out.as_slice()), ..rho0.clone() })
    }
}

/// Record of an exact evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub times: Vec<f64>,
    pub order_param: Vec<f64>,
    pub sz: Vec<f64>,
    pub renormalizations: usize,
    pub max_drift: f64,
    /// Smallest eigenvalue seen at record times (tracked for `L ≤ 6`).
    pub min_eigenvalue: f64,
}

impl OracleRun {
    /// Same layout as a trajectory ensemble, with zero spread and `n_traj = 0`.
    pub fn to_stats(&self) -> EnsembleStats {
        let zeros = vec![0.0; self.times.len()];
        EnsembleStats {
            times: self.times.clone(),
            mean: self.order_param.clone(),
            variance: zeros.clone(),
            stderr: zeros,
            n_traj: 0,
            mean_entropy: None,
            mean_sz: self.sz.clone(),
            mean_j2: None,
        }
    }
}

/// Phase average of `exp(iφS)ρexp(−iφS)` over uniform `φ`: `ρ − ¼[S,[S,ρ]]`.
pub fn scrambling_channel(rho: &DensityMatrix, l: usize, m: usize) -> Result<DensityMatrix> {
    let n = rho.local_dim;
    let s = LocalOperator::new(vec![l, m], n, swap_matrix(n), OpKind::Unitary)?;
    let sm = s.embed(rho.num_sites)?;
    let c = &sm * &rho.matrix - &rho.matrix * &sm;
    let dc = &sm * &c - &c * &sm;
    Ok(DensityMatrix { matrix: &rho.matrix - dc * C64::new(0.25, 0.0), ..rho.clone() })
}

/// `(1/L)Σ_α tr(ρP_α)` over the order-parameter projectors of `spec`.
pub fn order_param_exact(rho: &DensityMatrix, spec: &ProtocolSpec) -> Result<f64> {
    let ops = spec.order_param_projectors()?;
    let mut s = 0.0;
    for p in &ops {
        s += rho.expectation(p)?.re;
    }
    Ok(s / ops.len() as f64)
}
