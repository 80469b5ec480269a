//! Classical absorbing random walk of the singlet relative coordinate.
//!
//! The unknowns are `𝒫_r = Σ_ℓ ⟨P_{ℓ,ℓ+r}⟩` for separations `r ≠ 0` on a
//! periodic chain (`d = 1`) or an `L×L` torus (`d = 2`). Since `𝒫` is
//! invariant under the lattice point group, the solver works on one
//! representative per orbit: `r ∈ {1,…,⌊L/2⌋}` in one dimension and the
//! dihedral orbits `0 ≤ a ≤ b ≤ L/2`, `(a,b) ≠ 0`, on the torus.
//!
//! Before folding, the generator of the long-range walk is
//!
//! ```text
//! ∂_t 𝒫_r = Σ_{r'≠0} γ_{r'} (𝒫_{r+r'} + 𝒫_{r−r'} − 𝒫_r (2 − δ_{r,−r'} − δ_{r,r'})) − 2λ γ_r 𝒫_r
//! ```
//!
//! with no `𝒫_0` variable and `Σ_{r≠0} γ_r = 1`. With noise, `∂_t𝒫 = 2η − (H̃ + 4η)𝒫`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{lowest_eigenpairs, LanczosOptions};
use crate::state::QuditState;

/// Largest folded dimension solved with dense linear algebra.
pub const MAX_DENSE_DIM: usize = 8192;
/// Largest folded dimension propagated through a full eigendecomposition.
pub const MAX_EIGEN_DIM: usize = 2048;

/// Rates and couplings of the walk. `delta = None` is the nearest-neighbour walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkParams {
    #[serde(default = "one_dim")]
    pub dim: usize,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "unit")]
    pub lambda: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub kappa: f64,
}

fn one_dim() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl WalkParams {
    pub fn nearest(dim: usize) -> Self {
        WalkParams { dim, delta: None, lambda: 1.0, eta: 0.0, kappa: 0.0 }
    }

    pub fn long_range(dim: usize, delta: f64) -> Self {
        WalkParams { delta: Some(delta), ..Self::nearest(dim) }
    }

    fn validate(&self, num_sites: usize) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::config("dim", format!("only d = 1 and d = 2 are supported, got {}", self.dim)));
        }
        if num_sites < 4 {
            return Err(Error::config("L", format!("need L ≥ 4, got {num_sites}")));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config("delta", format!("need a finite Δ ≥ 0, got {d}")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", format!("need 0 ≤ λ ≤ 1, got {}", self.lambda)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", format!("need η ≥ 0, got {}", self.eta)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa", format!("need κ ≥ 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// Folded generator `H̃` (noise excluded) and its orbit bookkeeping.
#[derive(Clone, Debug)]
pub struct WalkGenerator {
    params: WalkParams,
    num_sites: usize,
    reps: Vec<Vec<usize>>,
    orbit_sizes: Vec<usize>,
    gamma: Vec<f64>,
    gamma_norm: f64,
    h: DMatrix<f64>,
}

/// Minimal-image component.
fn fold1(x: usize, l: usize) -> usize {
    x.min(l - x)
}

/// Orbit label of a lattice vector.
fn label(v: &[usize], l: usize) -> Vec<usize> {
    let mut k: Vec<usize> = v.iter().map(|&x| fold1(x, l)).collect();
    k.sort_unstable();
    k
}

fn norm(v: &[usize], l: usize) -> f64 {
    v.iter().map(|&x| (fold1(x, l) as f64).powi(2)).sum::<f64>().sqrt()
}

fn vectors(dim: usize, l: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        (1..l).map(|x| vec![x]).collect()
    } else {
        (0..l * l).filter(|&i| i != 0).map(|i| vec![i % l, i / l]).collect()
    }
}

/// Builds the folded generator for an `L`-site chain or `L×L` torus.
pub fn build_generator(params: &WalkParams, num_sites: usize) -> Result<WalkGenerator> {
    params.validate(num_sites)?;
    let l = num_sites;
    let all = vectors(params.dim, l);

    let mut reps: Vec<Vec<usize>> = all.iter().map(|v| label(v, l)).collect();
    reps.sort();
    reps.dedup();
    if reps.len() > MAX_DENSE_DIM {
        return Err(Error::config("L", format!("{} orbits exceed the dense limit {MAX_DENSE_DIM}", reps.len())));
    }
    let index = |k: &[usize]| reps.binary_search_by(|r| r.as_slice().cmp(k)).expect("orbit label");
    let mut orbit_sizes = vec![0usize; reps.len()];
    for v in &all {
        orbit_sizes[index(&label(v, l))] += 1;
    }

    // rate by orbit, normalized over all nonzero vectors
    let raw = |k: &[usize]| -> f64 {
        let r = norm(k, l);
        match params.delta {
            Some(d) => r.powf(-d),
            None => {
                if (r - 1.0).abs() < 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };
    let total: f64 = reps.iter().zip(&orbit_sizes).map(|(k, &m)| raw(k) * m as f64).sum();
    let gamma: Vec<f64> = reps.iter().map(|k| raw(k) / total).collect();
    let gamma_norm = 1.0 / total;

    let dim = reps.len();
    let diff = 1.0 + params.kappa;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    // one representative vector per orbit: the label itself is a lattice vector
    let sub = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().zip(b).map(|(&x, &y)| (x + l - y) % l).collect() };
    for (i, r) in reps.iter().enumerate() {
        for s in &all {
            if s == r {
                continue;
            }
            let gam = gamma[index(&label(&sub(r, s), l))];
            if gam != 0.0 {
                g[(i, index(&label(s, l)))] += diff * 2.0 * gam;
            }
        }
        g[(i, i)] += diff * (-2.0 + 2.0 * gamma[i]) - 2.0 * params.lambda * gamma[i];
    }
    Ok(WalkGenerator { params: params.clone(), num_sites, reps, orbit_sizes, gamma, gamma_norm, h: -g })
}

/// Trajectory of an evolution. Profiles are the raw solver output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkRun {
    pub times: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
}

impl WalkRun {
    /// Profiles with negative round-off clipped to zero, for reporting.
    pub fn clipped(&self) -> Vec<Vec<f64>> {
        self.profiles.iter().map(|p| p.iter().map(|x| x.max(0.0)).collect()).collect()
    }

    /// `𝒫_r(t)` for one orbit index.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.profiles.iter().map(|p| p[i]).collect()
    }
}

impl WalkGenerator {
    pub fn params(&self) -> &WalkParams {
        &self.params
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    /// Orbit representatives (`[r]` in one dimension, `[a, b]` with `a ≤ b` on the torus).
    pub fn representatives(&self) -> &[Vec<usize>] {
        &self.reps
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    /// Normalized rate `γ_r` of each orbit.
    pub fn rates(&self) -> &[f64] {
        &self.gamma
    }

    /// `Γ_Δ` in `γ_r = Γ_Δ |r|^{−Δ}`.
    pub fn rate_normalization(&self) -> f64 {
        self.gamma_norm
    }

    /// `H̃` without the noise diagonal, acting on orbit values.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Orbit index of a separation vector.
    pub fn index_of(&self, v: &[usize]) -> Option<usize> {
        if v.len() != self.params.dim {
            return None;
        }
        let k = label(&v.iter().map(|&x| x % self.num_sites).collect::<Vec<_>>(), self.num_sites);
        self.reps.binary_search(&k).ok()
    }

    /// Half the orbit size: `Σ_i c_i 𝒫_i` counts every unordered pair once.
    pub fn pair_weights(&self) -> Vec<f64> {
        self.orbit_sizes.iter().map(|&m| 0.5 * m as f64).collect()
    }

    /// `Σ_{ℓ<m} ⟨P_{ℓ,m}⟩` represented by a profile.
    pub fn total_weight(&self, profile: &[f64]) -> f64 {
        self.orbit_sizes.iter().zip(profile).map(|(&m, p)| 0.5 * m as f64 * p).sum()
    }

    /// `H̃ + 4η`.
    fn full(&self) -> DMatrix<f64> {
        let mut k = self.h.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += 4.0 * self.params.eta;
        }
        k
    }

    /// `C^{1/2} M C^{−1/2}` with `C` the pair weights, symmetrized.
    fn symmetrize(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let c: Vec<f64> = self.pair_weights().iter().map(|x| x.sqrt()).collect();
        let n = m.nrows();
        let s = DMatrix::from_fn(n, n, |i, j| c[i] * m[(i, j)] / c[j]);
        let asym = (&s - s.transpose()).amax();
        if asym > 1e-10 * s.amax().max(1.0) {
            return Err(Error::Numerical(format!("folded generator is not reversible (asymmetry {asym:.3e})")));
        }
        Ok((&s + s.transpose()) * 0.5)
    }

    /// Source term `2η` per orbit.
    fn source(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 2.0 * self.params.eta)
    }

    /// Néel start in one dimension: `𝒫_r = L/2` on odd `r`.
    pub fn neel_profile(&self) -> Result<Vec<f64>> {
        if self.params.dim != 1 || self.num_sites % 2 != 0 {
            return Err(Error::config("L", "the Néel profile needs an even chain"));
        }
        let half = self.num_sites as f64 / 2.0;
        Ok(self.reps.iter().map(|r| if r[0] % 2 == 1 { half } else { 0.0 }).collect())
    }

    /// Evolves `p0` and records on `times`: exact eigenpropagation up to
    /// `MAX_EIGEN_DIM` orbits, RK4 beyond.
    pub fn evolve(&self, p0: &[f64], times: &[f64]) -> Result<WalkRun> {
        if self.dim() <= MAX_EIGEN_DIM {
            self.evolve_exact(p0, times)
        } else {
            self.evolve_rk4(p0, times, None)
        }
    }

    fn check_start(&self, p0: &[f64], times: &[f64]) -> Result<()> {
        if p0.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("profile of length {} for {} orbits", p0.len(), self.dim())));
        }
        if p0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::config("P0", "initial weights must be finite and non-negative"));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::config("times", "record times must be non-negative and increasing"));
        }
        Ok(())
    }

    fn stationary_or_zero(&self) -> Result<DVector<f64>> {
        if self.params.eta > 0.0 {
            Ok(DVector::from_vec(self.stationary_noisy()?))
        } else {
            Ok(DVector::zeros(self.dim()))
        }
    }

    pub fn evolve_exact(&self, p0: &[f64], times: &[f64]) -> Result<WalkRun> {
        self.check_start(p0, times)?;
        let s = self.symmetrize(&self.full())?;
        let eig = SymmetricEigen::new(s);
        let c: Vec<f64> = self.pair_weights().iter().map(|x| x.sqrt()).collect();
        let fixed = self.stationary_or_zero()?;
        let x0 = DVector::from_fn(self.dim(), |i, _| c[i] * (p0[i] - fixed[i]));
        let coeff = eig.eigenvectors.transpose() * x0;
        let mut run = WalkRun { times: times.to_vec(), profiles: Vec::new(), totals: Vec::new() };
        for &t in times {
            let decayed = DVector::from_fn(self.dim(), |k, _| coeff[k] * (-eig.eigenvalues[k] * t).exp());
            let x = &eig.eigenvectors * decayed;
            let p: Vec<f64> = (0..self.dim()).map(|i| x[i] / c[i] + fixed[i]).collect();
            run.totals.push(self.total_weight(&p));
            run.profiles.push(p);
        }
        Ok(run)
    }

    /// Fixed-step RK4; `dt` defaults to `0.5/‖H̃ + 4η‖_∞`.
    pub fn evolve_rk4(&self, p0: &[f64], times: &[f64], dt: Option<f64>) -> Result<WalkRun> {
        self.check_start(p0, times)?;
        let k = self.full();
        let b = self.source();
        let dt_max = dt.unwrap_or_else(|| {
            let row_max = k.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
            0.5 / row_max.max(1e-12)
        });
        let rhs = |p: &DVector<f64>| &b - &k * p;
        let mut p = DVector::from_column_slice(p0);
        let mut t = 0.0;
        let mut last_total = self.total_weight(p.as_slice());
        let mut run = WalkRun { times: times.to_vec(), profiles: Vec::new(), totals: Vec::new() };
        for &target in times {
            let span = target - t;
            let steps = (span / dt_max).ceil() as usize;
            for _ in 0..steps {
                let h = span / steps as f64;
                let k1 = rhs(&p);
                let k2 = rhs(&(&p + &k1 * (0.5 * h)));
                let k3 = rhs(&(&p + &k2 * (0.5 * h)));
                let k4 = rhs(&(&p + &k3 * h));
                p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                if self.params.eta == 0.0 {
                    let total = self.total_weight(p.as_slice());
                    if total > last_total * (1.0 + 1e-10) + 1e-14 {
                        return Err(Error::Numerical(format!("total weight grew from {last_total} to {total}; reduce dt")));
                    }
                    last_total = total;
                }
            }
            t = target;
            run.totals.push(self.total_weight(p.as_slice()));
            run.profiles.push(p.as_slice().to_vec());
        }
        Ok(run)
    }

    /// Smallest eigenvalue `τ` of `H̃` (the noise diagonal is excluded).
    pub fn smallest_eigenvalue(&self) -> Result<f64> {
        let s = self.symmetrize(&self.h)?;
        let tau = if self.dim() <= MAX_EIGEN_DIM {
            SymmetricEigen::new(s).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            let n = self.dim();
            let matvec = |x: &[f64], y: &mut [f64]| {
                let v = &s * DVector::from_column_slice(x);
                y.copy_from_slice(v.as_slice());
            };
            let opts = LanczosOptions { tol: 1e-12, krylov_dim: 200, max_restarts: 200, seed: 7 };
            lowest_eigenpairs(n, 1, matvec, opts)?.values[0]
        };
        if tau < -1e-10 {
            return Err(Error::Numerical(format!("negative decay rate {tau:.3e}: generator is not dissipative")));
        }
        Ok(tau)
    }

    /// Solves `(H̃ + 4η)𝒫* = 2η`.
    pub fn stationary_noisy(&self) -> Result<Vec<f64>> {
        if !(self.params.eta > 0.0) {
            return Err(Error::config("eta", "the noisy fixed point needs η > 0"));
        }
        let lu = self.full().lu();
        let x = lu
            .solve(&self.source())
            .ok_or_else(|| Error::Numerical("noisy stationary system is singular".into()))?;
        Ok(x.as_slice().to_vec())
    }
}

/// `μ = −[ln τ(2L) − ln τ(L)]/ln 2`, so that `τ ∝ L^{−μ}` gives `μ > 0`.
pub fn mu_exponent(params: &WalkParams, num_sites: usize) -> Result<f64> {
    let t1 = build_generator(params, num_sites)?.smallest_eigenvalue()?;
    let t2 = build_generator(params, 2 * num_sites)?.smallest_eigenvalue()?;
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::Numerical(format!("decay rates must be positive, got {t1} and {t2}")));
    }
    Ok(-(t2.ln() - t1.ln()) / std::f64::consts::LN_2)
}

/// Range exponent at which `μ(Δ, L_small)` and `μ(Δ, L_large)` cross, searched
/// on `[lo, hi]` by a scan of `steps` intervals and bisection of the first sign change.
pub fn mu_crossing(dim: usize, l_small: usize, l_large: usize, lo: f64, hi: f64, steps: usize) -> Result<f64> {
    let gap = |d: f64| -> Result<f64> {
        let p = WalkParams::long_range(dim, d);
        Ok(mu_exponent(&p, l_small)? - mu_exponent(&p, l_large)?)
    };
    let mut a = lo;
    let mut ga = gap(a)?;
    for k in 1..=steps {
        let b = lo + (hi - lo) * k as f64 / steps as f64;
        let gb = gap(b)?;
        if ga == 0.0 {
            return Ok(a);
        }
        if ga.signum() != gb.signum() {
            let (mut x, mut y, mut gx) = (a, b, ga);
            for _ in 0..40 {
                let m = 0.5 * (x + y);
                let gm = gap(m)?;
                if gm.signum() == gx.signum() {
                    x = m;
                    gx = gm;
                } else {
                    y = m;
                }
                if y - x < 1e-4 {
                    break;
                }
            }
            return Ok(0.5 * (x + y));
        }
        a = b;
        ga = gb;
    }
    Err(Error::Numerical(format!("μ curves for L = {l_small} and {l_large} do not cross on [{lo}, {hi}]")))
}

/// Small-`q` behaviour of the long-range diffusion kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Dispersion {
    /// `D_q ∼ q²`.
    Quadratic,
    /// `D_q ∼ q² ln(1/q)`.
    QuadraticLog,
    /// `D_q ∼ q^s` with `s < 2`.
    Anomalous { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    pub delta: f64,
    pub num_sites: usize,
    pub q: Vec<f64>,
    pub d_q: Vec<f64>,
    /// Log-log slope over the whole window.
    pub slope: f64,
    pub power_rms: f64,
    /// `b` in `D_q/q² ≈ a + b ln(1/q)`.
    pub log_coefficient: f64,
    pub log_rms: f64,
    pub regime: Dispersion,
}

/// `D_q = 2Σ_{r=1}^{L−1} γ_r (1 − cos qr)` for the normalized long-range
/// rates, sampled at `q = 2πk/L` for `k = 1..=k_max` (default `L/64`).
pub fn dispersion_asymptotics(delta: f64, num_sites: usize, k_max: Option<usize>) -> Result<DispersionFit> {
    if !(delta > 1.0 && delta.is_finite()) {
        return Err(Error::config("delta", format!("need Δ > 1, got {delta}")));
    }
    let l = num_sites;
    let k_max = k_max.unwrap_or(l / 64);
    if k_max < 4 || 2 * k_max > l {
        return Err(Error::config("k_max", format!("need 4 ≤ k_max ≤ L/2, got {k_max} for L = {l}")));
    }
    let g = crate::protocols::long_range_rates(l, delta);
    let q: Vec<f64> = (1..=k_max).map(|k| std::f64::consts::TAU * k as f64 / l as f64).collect();
    let d_q: Vec<f64> = q
        .iter()
        .map(|&qq| 2.0 * (1..l).map(|r| g[r] * (1.0 - (qq * r as f64).cos())).sum::<f64>())
        .collect();
    let lq: Vec<f64> = q.iter().map(|x| x.ln()).collect();
    let ld: Vec<f64> = d_q.iter().map(|x| x.ln()).collect();
    let (slope, icpt) = line_fit(&lq, &ld);
    let power_rms = rms(lq.iter().zip(&ld).map(|(x, y)| icpt + slope * x - y));

    let inv: Vec<f64> = lq.iter().map(|x| -x).collect();
    let ratio: Vec<f64> = q.iter().zip(&d_q).map(|(qq, d)| d / (qq * qq)).collect();
    let (b, a) = line_fit(&inv, &ratio);
    let model: Vec<f64> = inv.iter().zip(&q).map(|(li, qq)| qq * qq * (a + b * li)).collect();
    let log_rms = if model.iter().all(|m| *m > 0.0) {
        rms(model.iter().zip(&ld).map(|(m, y)| m.ln() - y))
    } else {
        f64::INFINITY
    };
    let regime = if (slope - 2.0).abs() < 0.1 {
        Dispersion::Quadratic
    } else if b > 0.0 && log_rms < 0.5 * power_rms {
        Dispersion::QuadraticLog
    } else {
        Dispersion::Anomalous { exponent: slope }
    };
    Ok(DispersionFit { delta, num_sites, q, d_q, slope, power_rms, log_coefficient: b, log_rms, regime })
}

/// Ordinary least squares `y ≈ c + s·x`, returns `(s, c)`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in it {
        s += x * x;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}

/// `𝒫_r = Σ_ℓ ⟨P_{ℓ,ℓ+r}⟩` of a qubit chain, one value per folded separation `r = 1..=L/2`.
pub fn singlet_profile(state: &QuditState) -> Result<Vec<f64>> {
    if state.local_dim() != 2 {
        return Err(Error::UnsupportedLocalDim(state.local_dim()));
    }
    let l = state.num_sites();
    (1..=l / 2)
        .map(|r| {
            let mut s = 0.0;
            for a in 0..l {
                s += 0.5 * (1.0 - state.swap_expectation(a, (a + r) % l)?);
            }
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tau(params: &WalkParams, l: usize) -> f64 {
        build_generator(params, l).unwrap().smallest_eigenvalue().unwrap()
    }

    #[test]
    fn all_to_all_rate() {
        for l in [11, 101] {
            let t = tau(&WalkParams::long_range(1, 0.0), l);
            assert!((t - 2.0 / (l as f64 - 1.0)).abs() < 1e-10, "L = {l}: {t}");
        }
        // uniform profile is the slow mode
        let g = build_generator(&WalkParams::long_range(1, 0.0), 11).unwrap();
        let ones = DVector::from_element(g.dim(), 1.0);
        let hv = g.matrix() * &ones;
        assert!(hv.iter().all(|x| (x - 0.2).abs() < 1e-12));
    }

    #[test]
    fn nearest_neighbour_matrix_is_reflecting_with_absorption_at_one() {
        let l = 12;
        let g = build_generator(&WalkParams::nearest(1), l).unwrap();
        let h = g.matrix();
        assert_eq!(g.dim(), 6);
        // independent construction: hop rate 1 in each direction, no
        // move into r = 0, unit absorption at r = 1, mirror at r = L/2
        let mut want = DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            let r = i + 1;
            if r > 1 {
                want[(i, i - 1)] = -1.0;
            }
            if r < 6 {
                want[(i, i + 1)] = -1.0;
            }
            want[(i, i)] = 2.0;
        }
        // r = L/2 receives from both r = L/2 − 1 and its mirror image
        want[(5, 4)] = -2.0;
        assert!((h - &want).amax() < 1e-12, "{h}");
    }

    #[test]
    fn diffusion_conserves_weight() {
        for (dim, l, delta) in [(1, 16, Some(1.5)), (1, 15, None), (2, 8, Some(2.0)), (2, 6, None)] {
            let p = WalkParams { dim, delta, lambda: 0.0, eta: 0.0, kappa: 0.3 };
            let g = build_generator(&p, l).unwrap();
            let w = g.pair_weights();
            for j in 0..g.dim() {
                let col: f64 = (0..g.dim()).map(|i| w[i] * g.matrix()[(i, j)]).sum();
                assert!(col.abs() < 1e-12, "d = {dim}, column {j}: {col}");
            }
        }
    }

    #[test]
    fn orbit_sizes_cover_the_lattice() {
        let g = build_generator(&WalkParams::long_range(2, 1.0), 7).unwrap();
        assert_eq!(g.orbit_sizes().iter().sum::<usize>(), 48);
        let g = build_generator(&WalkParams::nearest(1), 10).unwrap();
        assert_eq!(g.orbit_sizes(), &[2, 2, 2, 2, 1]);
        assert_eq!(g.index_of(&[7]), Some(2));
        let rates: f64 = g.rates().iter().zip(g.orbit_sizes()).map(|(a, &m)| a * m as f64).sum();
        assert!((rates - 1.0).abs() < 1e-15);
        assert!((g.rates()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nearest_neighbour_tau_scales_diffusively() {
        let p = WalkParams::nearest(1);
        let vals: Vec<f64> = [64, 128, 256, 512].iter().map(|&l| tau(&p, l) * (l * l) as f64).collect();
        for w in vals.windows(2) {
            assert!((w[1] - w[0]).abs() / w[0] < 0.05, "{vals:?}");
        }
        assert!((vals[3] - std::f64::consts::PI.powi(2)).abs() < 0.2, "{vals:?}");
    }

    #[test]
    fn scrambling_speeds_up_decay() {
        let mut p = WalkParams::nearest(1);
        let mut last = 0.0;
        for kappa in [0.0, 1.0, 4.0] {
            p.kappa = kappa;
            let t = tau(&p, 64);
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn exponent_limits() {
        let mu0 = mu_exponent(&WalkParams::long_range(1, 0.0), 128).unwrap();
        assert!((mu0 - 1.0).abs() < 0.02, "{mu0}");
        let mu6 = mu_exponent(&WalkParams::long_range(1, 6.0), 256).unwrap();
        assert!((mu6 - 2.0).abs() < 0.1, "{mu6}");
    }

    #[test]
    fn exact_and_rk4_agree() {
        let mut p = WalkParams::long_range(1, 2.5);
        p.eta = 0.01;
        let g = build_generator(&p, 24).unwrap();
        let p0 = g.neel_profile().unwrap();
        let times = [0.5, 2.0, 10.0];
        let a = g.evolve_exact(&p0, &times).unwrap();
        let b = g.evolve_rk4(&p0, &times, Some(0.002)).unwrap();
        for (x, y) in a.profiles.iter().flatten().zip(b.profiles.iter().flatten()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        // long times approach the noisy fixed point
        let fixed = g.stationary_noisy().unwrap();
        let late = g.evolve_exact(&p0, &[1e4]).unwrap();
        for (x, y) in late.profiles[0].iter().zip(&fixed) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn total_decays_at_the_smallest_rate() {
        let g = build_generator(&WalkParams::nearest(1), 20).unwrap();
        let t = g.smallest_eigenvalue().unwrap();
        let run = g.evolve(&g.neel_profile().unwrap(), &[200.0, 210.0]).unwrap();
        let rate = (run.totals[0] / run.totals[1]).ln() / 10.0;
        assert!((rate - t).abs() < 1e-6 * t, "{rate} vs {t}");
    }

    #[test]
    fn zero_start_without_noise_stays_zero() {
        let g = build_generator(&WalkParams::nearest(1), 8).unwrap();
        let run = g.evolve(&[0.0; 4], &[1.0, 5.0]).unwrap();
        assert!(run.profiles.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn strong_noise_mixes_maximally() {
        let mut p = WalkParams::long_range(1, 1.5);
        let g0 = build_generator(&p, 16).unwrap();
        p.eta = 1e6 * g0.matrix().amax() * 16.0;
        let g = build_generator(&p, 16).unwrap();
        assert!(g.stationary_noisy().unwrap().iter().all(|x| (x - 0.5).abs() < 1e-3));
    }

    #[test]
    fn weak_noise_is_linear() {
        let mut p = WalkParams::nearest(1);
        p.eta = 1e-9;
        let a = build_generator(&p, 16).unwrap().stationary_noisy().unwrap();
        p.eta = 2e-9;
        let b = build_generator(&p, 16).unwrap().stationary_noisy().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn profile_weight_counts_unordered_pairs() {
        let l = 8;
        let g = build_generator(&WalkParams::nearest(1), l).unwrap();
        let s = crate::protocols::dicke_state(l, 3).unwrap();
        let amps: Vec<_> = (0..256).map(|i| crate::linalg::C64::new(((i * 37) % 11) as f64 - 5.0, ((i * 13) % 7) as f64)).collect();
        for st in [s, QuditState::from_amplitudes(l, 2, amps).unwrap()] {
            let prof = singlet_profile(&st).unwrap();
            let mut pairs = 0.0;
            for a in 0..l {
                for b in a + 1..l {
                    pairs += 0.5 * (1.0 - st.swap_expectation(a, b).unwrap());
                }
            }
            assert!((g.total_weight(&prof) - pairs).abs() < 1e-10);
        }
        let neel = QuditState::product(2, &[0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let prof = singlet_profile(&neel).unwrap();
        for (x, y) in prof.iter().zip(g.neel_profile().unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dispersion_regimes() {
        let fit = dispersion_asymptotics(5.0, 4096, None).unwrap();
        assert_eq!(fit.regime, Dispersion::Quadratic);
        assert!((fit.slope - 2.0).abs() < 0.1);
        let fit = dispersion_asymptotics(2.0, 4096, None).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1);
        assert!(matches!(fit.regime, Dispersion::Anomalous { .. }));
        let fit = dispersion_asymptotics(3.0, 4096, None).unwrap();
        assert_eq!(fit.regime, Dispersion::QuadraticLog);
        assert!(fit.log_coefficient > 0.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_generator(&WalkParams::nearest(3), 8).unwrap_err().is_config());
        assert!(build_generator(&WalkParams::nearest(1), 2).unwrap_err().is_config());
        assert!(build_generator(&WalkParams::nearest(1), 7).unwrap().neel_profile().is_err());
        assert!(dispersion_asymptotics(1.0, 512, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn absorption_never_increases_weight(delta in 0.0f64..6.0, l in 6usize..30, seed in 0u64..1000) {
            let g = build_generator(&WalkParams::long_range(1, delta), l).unwrap();
            let p0: Vec<f64> = (0..g.dim()).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0).collect();
            let times: Vec<f64> = (0..20).map(|k| 0.5 * k as f64).collect();
            let run = g.evolve_exact(&p0, &times).unwrap();
            for w in run.totals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            prop_assert!(run.profiles.iter().flatten().all(|x| *x >= -1e-10));
        }

        #[test]
        fn mu_stays_in_envelope(delta in 0.0f64..8.0, k in 3u32..6) {
            let l = 1usize << k;
            let mu = mu_exponent(&WalkParams::long_range(1, delta), l).unwrap();
            prop_assert!((1.0..=2.5).contains(&mu), "μ = {}", mu);
        }
    }
}
