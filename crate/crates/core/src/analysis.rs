//! Exponent fits, finite-size collapse, Dicke-state entropies and target
//! fidelities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ln_binomial;
use crate::protocols::TargetState;
use crate::state::QuditState;
use crate::trajectory::EnsembleStats;
use crate::walk::WalkRun;

pub use crate::words::{motzkin_height_profile, HeightProfile};

/// A decaying observable with optional one-sigma errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Option<Vec<f64>>,
}

impl Series {
    pub fn new(times: Vec<f64>, values: Vec<f64>, errors: Option<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || errors.as_ref().is_some_and(|e| e.len() != times.len()) {
            return Err(Error::DimensionMismatch("series columns differ in length".into()));
        }
        Ok(Series { times, values, errors })
    }

    /// Ensemble mean with its standard error.
    pub fn from_stats(stats: &EnsembleStats) -> Self {
        let errors = if stats.n_traj > 0 { Some(stats.stderr.clone()) } else { None };
        Series { times: stats.times.clone(), values: stats.mean.clone(), errors }
    }

    /// Total singlet weight of a classical run.
    pub fn from_walk_total(run: &WalkRun) -> Self {
        Series { times: run.times.clone(), values: run.totals.clone(), errors: None }
    }

    /// One orbit component of a classical run.
    pub fn from_walk_component(run: &WalkRun, i: usize) -> Self {
        Series { times: run.times.clone(), values: run.component(i), errors: None }
    }

    fn error(&self, i: usize) -> f64 {
        self.errors.as_ref().map_or(0.0, |e| e[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    PowerLaw,
    CutoffCollapse,
}

/// Best rescaling exponent of the `t/L^z` collapse and its RMS spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseScan {
    pub z_grid: Vec<f64>,
    pub spread: Vec<f64>,
    pub z_best: f64,
    pub quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: FitMethod,
    pub z: f64,
    pub z_err: f64,
    pub window: (f64, f64),
    /// RMS residual in log space.
    pub goodness: f64,
    pub sizes: Vec<usize>,
    /// Exponential tail time `t_c` per size (collapse fits only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseScan>,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Weighted least squares `y ≈ c + s·x`. Returns `(s, c, σ_s, rms)` where
/// `σ_s` is the larger of the formal and residual-scaled standard errors.
fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64, f64) {
    let w: Vec<f64> = sigma.iter().map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 1.0 }).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(a, b)| a * (b - mx) * (b - mx)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((a, b), c)| a * (b - mx) * (c - my)).sum();
    let s = sxy / sxx;
    let c = my - s * mx;
    let n = x.len() as f64;
    let chi2: f64 = w.iter().zip(x).zip(y).map(|((a, b), d)| a * (d - c - s * b).powi(2)).sum();
    let rms = (x.iter().zip(y).map(|(b, d)| (d - c - s * b).powi(2)).sum::<f64>() / n).sqrt();
    let formal = if sigma.iter().all(|s| *s > 0.0) { 1.0 / sxx } else { 0.0 };
    let scaled = if n > 2.0 { chi2 / (n - 2.0) / sxx } else { 0.0 };
    (s, c, formal.max(scaled).sqrt(), rms)
}

/// Points of `series` inside `[lo, hi]` with positive values above three
/// standard errors, as `(ln t, ln y, σ_{ln y}, t)`.
fn usable(series: &Series, lo: f64, hi: f64) -> Vec<(f64, f64, f64, f64)> {
    (0..series.times.len())
        .filter_map(|i| {
            let (t, y, e) = (series.times[i], series.values[i], series.error(i));
            (t >= lo && t <= hi && t > 0.0 && y > 0.0 && y > 3.0 * e).then(|| (t.ln(), y.ln(), e / y, t))
        })
        .collect()
}

/// Fits `y ∼ t^{−1/z}` on `window` by weighted least squares in log-log space.
pub fn fit_power_law(series: &Series, window: (f64, f64)) -> Result<FitResult> {
    let pts = usable(series, window.0, window.1);
    if pts.len() < 8 {
        return Err(Error::Fit(format!(
            "{} usable points in [{}, {}], need 8 positive values above 3 standard errors",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let s: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let (slope, _, sigma, rms) = weighted_line(&x, &y, &s);
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("series does not decay on the window (slope {slope})")));
    }
    Ok(FitResult {
        method: FitMethod::PowerLaw,
        z: -1.0 / slope,
        z_err: sigma / (slope * slope),
        window: (pts[0].3, pts[pts.len() - 1].3),
        goodness: rms,
        sizes: Vec::new(),
        tail_times: Vec::new(),
        collapse: None,
    })
}

/// Selects the exponential tail of each curve: the points where the value
/// lies below `upper·max(y)` and above `floor` (and above three standard errors).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub upper: f64,
    pub floor: f64,
    pub min_points: usize,
}

impl Default for TailWindow {
    fn default() -> Self {
        TailWindow { upper: 0.2, floor: 1e-12, min_points: 4 }
    }
}

/// Exponential tail fit of one curve: `(t_c, σ_{ln t_c}, t_lo, t_hi, rms)`.
pub fn fit_tail(series: &Series, tail: &TailWindow) -> Result<(f64, f64, f64, f64, f64)> {
    let peak = series.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = series
        .values
        .iter()
        .position(|&y| y <= tail.upper * peak)
        .ok_or_else(|| Error::Fit("curve never drops into the tail window".into()))?;
    let pts: Vec<(f64, f64, f64)> = (first..series.times.len())
        .filter_map(|i| {
            let (t, y, e) = (series.times[i], series.values[i], series.error(i));
            (y > tail.floor && y > 3.0 * e).then(|| (t, y.ln(), e / y))
        })
        .collect();
    if pts.len() < tail.min_points {
        return Err(Error::Fit(format!("{} tail points, need {}", pts.len(), tail.min_points)));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let s: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let (slope, _, sigma, rms) = weighted_line(&x, &y, &s);
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("tail does not decay (slope {slope})")));
    }
    let tc = -1.0 / slope;
    let (t_lo, t_hi) = (x[0], x[x.len() - 1]);
    if tc > series.times[series.times.len() - 1] {
        return Err(Error::Fit(format!("tail time {tc:.3e} beyond the recorded range {t_hi}")));
    }
    Ok((tc, sigma / slope.abs(), t_lo, t_hi, rms))
}

/// `z` from the regression of the tail times `ln t_c` on `ln L`, together
/// with the amplitude-free collapse scan of the tails over `z ∈ [1.5, 4.5]`.
pub fn fit_cutoff_collapse(curves: &[(usize, Series)], tail: &TailWindow) -> Result<FitResult> {
    if curves.len() < 3 {
        return Err(Error::Fit(format!("{} system sizes, need at least 3", curves.len())));
    }
    let mut lnl = Vec::new();
    let mut lnt = Vec::new();
    let mut sig = Vec::new();
    let mut tails = Vec::new();
    let mut windows = Vec::new();
    let mut goodness = 0.0f64;
    for (l, s) in curves {
        let (tc, e, lo, hi, rms) = fit_tail(s, tail)?;
        lnl.push((*l as f64).ln());
        lnt.push(tc.ln());
        sig.push(e);
        tails.push(tc);
        windows.push((lo, hi));
        goodness = goodness.max(rms);
    }
    let (z, _, z_err, _) = weighted_line(&lnl, &lnt, &sig);
    let collapse = collapse_scan(curves, &windows);
    let window = (
        windows.iter().map(|w| w.0).fold(f64::INFINITY, f64::min),
        windows.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(FitResult {
        method: FitMethod::CutoffCollapse,
        z,
        z_err,
        window,
        goodness,
        sizes: curves.iter().map(|c| c.0).collect(),
        tail_times: tails,
        collapse,
    })
}

fn interp(t: &[f64], y: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|v| *v < x).clamp(1, t.len() - 1);
    let (t0, t1) = (t[k - 1], t[k]);
    let w = if t1 > t0 { (x - t0) / (t1 - t0) } else { 0.0 };
    y[k - 1] + w * (y[k] - y[k - 1])
}

/// RMS spread of `ln y(sL^z) − ln y(s₀L^z)` across sizes on a common grid of
/// the rescaled tail windows; `None` if the windows never overlap.
fn collapse_scan(curves: &[(usize, Series)], windows: &[(f64, f64)]) -> Option<CollapseScan> {
    const POINTS: usize = 32;
    let logs: Vec<(Vec<f64>, Vec<f64>)> = curves
        .iter()
        .map(|(_, s)| {
            let keep: Vec<usize> = (0..s.times.len()).filter(|&i| s.values[i] > 0.0).collect();
            (keep.iter().map(|&i| s.times[i]).collect(), keep.iter().map(|&i| s.values[i].ln()).collect())
        })
        .collect();
    let z_grid: Vec<f64> = (0..=60).map(|k| 1.5 + 0.05 * k as f64).collect();
    let mut spread = Vec::with_capacity(z_grid.len());
    for &z in &z_grid {
        let scale: Vec<f64> = curves.iter().map(|c| (c.0 as f64).powf(z)).collect();
        let lo = windows.iter().zip(&scale).map(|(w, s)| w.0 / s).fold(f64::NEG_INFINITY, f64::max);
        let hi = windows.iter().zip(&scale).map(|(w, s)| w.1 / s).fold(f64::INFINITY, f64::min);
        if !(hi > lo) {
            spread.push(f64::NAN);
            continue;
        }
        let mut acc = 0.0;
        for k in 0..POINTS {
            let x = lo + (hi - lo) * k as f64 / (POINTS - 1) as f64;
            let shifted: Vec<f64> = logs
                .iter()
                .zip(&scale)
                .map(|((t, y), s)| interp(t, y, x * s) - interp(t, y, lo * s))
                .collect();
            let m = shifted.iter().sum::<f64>() / shifted.len() as f64;
            acc += shifted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / shifted.len() as f64;
        }
        spread.push((acc / POINTS as f64).sqrt());
    }
    let (best, quality) = z_grid
        .iter()
        .zip(&spread)
        .filter(|(_, s)| s.is_finite())
        .fold((f64::NAN, f64::INFINITY), |(bz, bs), (z, s)| if *s < bs { (*z, *s) } else { (bz, bs) });
    best.is_finite().then_some(CollapseScan { z_grid, spread, z_best: best, quality })
}

/// Per-trajectory order-parameter records of one system size, kept for resampling.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySamples {
    pub num_sites: usize,
    pub times: Vec<f64>,
    pub runs: Vec<Vec<f64>>,
}

impl TrajectorySamples {
    pub fn new(num_sites: usize, times: Vec<f64>) -> Self {
        TrajectorySamples { num_sites, times, runs: Vec::new() }
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::DimensionMismatch(format!("{} values for {} times", values.len(), self.times.len())));
        }
        self.runs.push(values.to_vec());
        Ok(())
    }

    /// Mean and standard error `√(variance/n)` over the runs `pick` (repeats allowed).
    pub fn series(&self, pick: &[usize]) -> Result<Series> {
        let n = pick.len();
        if n < 2 {
            return Err(Error::Fit(format!("{n} trajectories, need at least 2")));
        }
        let mut mean = vec![0.0; self.times.len()];
        let mut err = vec![0.0; self.times.len()];
        for (i, (m, e)) in mean.iter_mut().zip(err.iter_mut()).enumerate() {
            let mu = pick.iter().map(|&k| self.runs[k][i]).sum::<f64>() / n as f64;
            let ss: f64 = pick.iter().map(|&k| (self.runs[k][i] - mu).powi(2)).sum();
            *m = mu;
            *e = (ss / n as f64 / n as f64).sqrt();
        }
        Series::new(self.times.clone(), mean, Some(err))
    }

    pub fn full_series(&self) -> Result<Series> {
        self.series(&(0..self.runs.len()).collect::<Vec<_>>())
    }
}

/// Tail exponent with a percentile bootstrap interval over trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapExponent {
    /// Estimate from the full ensembles.
    pub z: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub draws: usize,
    /// Resamples whose tail could not be fitted.
    pub failed: usize,
    pub tail_times: Vec<f64>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let x = q * (sorted.len() - 1) as f64;
    let k = (x.floor() as usize).min(sorted.len() - 1);
    let w = x - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] * (1.0 - w) + sorted[k + 1] * w
    } else {
        sorted[k]
    }
}

/// The [`fit_cutoff_collapse`] regression of `ln t_c` on `ln L`, repeated on
/// `n_boot` resamples (with replacement) of the trajectories of every size.
/// More than a tenth of failed resamples is an error.
pub fn bootstrap_tail_exponent(
    samples: &[TrajectorySamples],
    tail: &TailWindow,
    n_boot: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapExponent> {
    if !(confidence > 0.0 && confidence < 1.0) || n_boot < 10 {
        return Err(Error::config("confidence", "need 0 < confidence < 1 and at least 10 resamples"));
    }
    let curves = samples.iter().map(|s| Ok((s.num_sites, s.full_series()?))).collect::<Result<Vec<_>>>()?;
    let point = fit_cutoff_collapse(&curves, tail)?;
    let lnl: Vec<f64> = samples.iter().map(|s| (s.num_sites as f64).ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zs = Vec::with_capacity(n_boot);
    let mut failed = 0;
    for _ in 0..n_boot {
        let mut lnt = Vec::with_capacity(samples.len());
        let mut sig = Vec::with_capacity(samples.len());
        let mut ok = true;
        for s in samples {
            let n = s.runs.len();
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            match fit_tail(&s.series(&pick)?, tail) {
                Ok((tc, e, ..)) => {
                    lnt.push(tc.ln());
                    sig.push(e);
                }
                Err(_) => ok = false,
            }
        }
        if ok {
            zs.push(weighted_line(&lnl, &lnt, &sig).0);
        } else {
            failed += 1;
        }
    }
    if failed * 10 > n_boot {
        return Err(Error::Fit(format!("{failed} of {n_boot} resamples have no usable tail")));
    }
    zs.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - confidence);
    Ok(BootstrapExponent {
        z: point.z,
        lower: percentile(&zs, a),
        upper: percentile(&zs, 1.0 - a),
        confidence,
        draws: n_boot,
        failed,
        tail_times: point.tail_times,
    })
}

/// Entanglement entropy (nats) of a block of `ell` sites in the Dicke state
/// with `k` excitations on `L` sites: `−Σ_i p_i ln p_i` with the
/// hypergeometric weights `p_i = C(ℓ,i)C(L−ℓ,k−i)/C(L,k)`.
pub fn dicke_entropy(num_sites: usize, k: usize, ell: usize) -> f64 {
    if k > num_sites || ell > num_sites {
        return 0.0;
    }
    let norm = ln_binomial(num_sites, k);
    let lo = k.saturating_sub(num_sites - ell);
    let hi = ell.min(k);
    if lo == hi {
        return 0.0;
    }
    let s: f64 = (lo..=hi)
        .map(|i| {
            let lp = ln_binomial(ell, i) + ln_binomial(num_sites - ell, k - i) - norm;
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum();
    s.max(0.0)
}

/// `|⟨target|ψ⟩|²`.
pub fn fidelity_to_target(state: &QuditState, target: &TargetState) -> Result<f64> {
    Ok(state.inner(&target.state)?.norm_sqr() / (state.norm() * target.state.norm()).powi(2))
}

/// Weight of `ψ` in the span of `basis` (need not be orthogonal).
pub fn span_weight(state: &QuditState, basis: &[&QuditState]) -> Result<f64> {
    let mut ortho: Vec<Vec<crate::linalg::C64>> = Vec::new();
    for b in basis {
        if b.dim() != state.dim() {
            return Err(Error::DimensionMismatch(format!("basis vector of dimension {} vs {}", b.dim(), state.dim())));
        }
        let mut v = b.amplitudes().to_vec();
        for o in &ortho {
            let c: crate::linalg::C64 = o.iter().zip(&v).map(|(a, x)| a.conj() * x).sum();
            v.iter_mut().zip(o).for_each(|(x, a)| *x -= c * a);
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            ortho.push(v);
        }
    }
    let nn = state.norm().powi(2);
    Ok(ortho
        .iter()
        .map(|o| o.iter().zip(state.amplitudes()).map(|(a, x)| a.conj() * x).sum::<crate::linalg::C64>().norm_sqr())
        .sum::<f64>()
        / nn)
}
