//! Headline checks, one summary line each. Runs as a plain binary so the
//! lines are printed under `cargo test`; a filter argument selects checks by
//! number or by a word of their name.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use ffcontrol::analysis::{
    bootstrap_tail_exponent, dicke_entropy, fit_cutoff_collapse, span_weight, BootstrapExponent, Series, TailWindow,
    TrajectorySamples,
};
use ffcontrol::linalg::{max_abs, swap_matrix, CMatrix, C64};
use ffcontrol::oracle::{scrambling_channel, DensityMatrix, Oracle};
use ffcontrol::protocols::{
    anomalous_state, dicke_state, fredkin_residual, scrambling_unitary, swap_projector, Family,
    InitialState, ProtocolSpec, TargetKind,
};
use ffcontrol::state::{LocalOperator, OpKind, QuditState};
use ffcontrol::trajectory::{log_grid, Engine, EnsembleStats, TimeSeries, TrajectoryConfig};
use ffcontrol::walk::{build_generator, dispersion_asymptotics, mu_crossing, mu_exponent, WalkParams};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Collects sub-checks of one criterion into a single verdict.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, note: String) {
        if ok {
            self.notes.push(note);
        } else {
            self.failed.push(note);
        }
    }

    fn finish(self) -> Outcome {
        if self.failed.is_empty() {
            Ok(self.notes.join("; "))
        } else {
            Err(format!("{} | passed: {}", self.failed.join("; "), self.notes.join("; ")))
        }
    }
}

fn spec(family: Family, l: usize) -> ProtocolSpec {
    ProtocolSpec::new(family, l)
}

fn config(spec: ProtocolSpec, t_max: f64, seed: u64, per_decade: usize) -> TrajectoryConfig {
    let mut cfg = TrajectoryConfig::new(spec, t_max, seed);
    cfg.record_grid = Some(log_grid(0.1, t_max, per_decade));
    cfg.record_entropy = false;
    cfg.record_j2 = false;
    cfg
}

fn ensemble(cfg: &TrajectoryConfig, n: usize) -> EnsembleStats {
    Engine::new(cfg).unwrap().ensemble(cfg, n, None).unwrap()
}

fn samples(cfg: &TrajectoryConfig, n: usize) -> TrajectorySamples {
    let mut s = TrajectorySamples::new(cfg.protocol.num_sites, cfg.grid().unwrap());
    let mut keep = |_: u64, ts: &TimeSeries| s.push(&ts.order_param).unwrap();
    Engine::new(cfg).unwrap().ensemble(cfg, n, Some(&mut keep)).unwrap();
    s
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn random_rho(l: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1 << l;
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut m = &g * g.adjoint();
    let tr = m.trace();
    m /= tr;
    DensityMatrix::new(l, 2, m).unwrap()
}

fn all_to_all_rate() -> Outcome {
    let mut c = Checks::default();
    for l in [11, 101, 1001] {
        let tau = build_generator(&WalkParams::long_range(1, 0.0), l).unwrap().smallest_eigenvalue().unwrap();
        let err = (tau - 2.0 / (l as f64 - 1.0)).abs();
        c.check(err < 1e-10, format!("L={l} tau={tau:.12} err={err:.1e}"));
    }
    c.finish()
}

fn exponent_plateaus() -> Outcome {
    let mut c = Checks::default();
    let mu6 = mu_exponent(&WalkParams::long_range(1, 6.0), 256).unwrap();
    c.check((1.9..=2.1).contains(&mu6), format!("mu(6)={mu6:.4}"));
    let mu05 = mu_exponent(&WalkParams::long_range(1, 0.5), 256).unwrap();
    c.check((0.9..=1.1).contains(&mu05), format!("mu(0.5)={mu05:.4}"));
    let dc = mu_crossing(1, 128, 256, 1.0, 4.0, 12).unwrap();
    c.check((1.8..=2.5).contains(&dc), format!("crossing={dc:.3}"));
    let mu2 = mu_exponent(&WalkParams::long_range(2, 0.5), 48).unwrap();
    c.check((1.9..=2.1).contains(&mu2), format!("2D mu(0.5)={mu2:.4}"));
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for k in 1..=12 {
        let delta = 0.5 * k as f64;
        let mu = mu_exponent(&WalkParams::long_range(2, delta), 48).unwrap();
        if mu > worst.0 {
            worst = (mu, delta);
        }
    }
    let nn = mu_exponent(&WalkParams::nearest(2), 48).unwrap();
    c.check(worst.0 <= 2.4 && nn <= 2.4, format!("2D max mu={:.4} at {} (nn {nn:.4})", worst.0, worst.1));
    c.finish()
}

/// SwapSU(2) ensembles at L = 8, 10, 12 from the Néel state, 10⁴ trajectories each.
fn swap_ensembles() -> &'static Vec<(usize, EnsembleStats)> {
    static RUNS: OnceLock<Vec<(usize, EnsembleStats)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [8, 10, 12]
            .iter()
            .map(|&l| (l, ensemble(&config(spec(Family::SwapSu(2), l), 300.0, 100 + l as u64, 30), 10_000)))
            .collect()
    })
}

fn diffusive_exponent() -> Outcome {
    let mut c = Checks::default();
    let curves: Vec<(usize, Series)> = [16usize, 24, 32, 48, 64, 96, 128]
        .iter()
        .map(|&l| {
            let g = build_generator(&WalkParams::nearest(1), l).unwrap();
            let times = log_grid(0.1, 3.0 * (l * l) as f64, 30);
            let run = g.evolve(&g.neel_profile().unwrap(), &times).unwrap();
            (l, Series::from_walk_component(&run, 0))
        })
        .collect();
    let fit = fit_cutoff_collapse(&curves, &TailWindow::default()).unwrap();
    c.check((fit.z - 2.0).abs() <= 0.05, format!("classical z={:.4}", fit.z));
    let quantum: Vec<(usize, Series)> = swap_ensembles().iter().map(|(l, s)| (*l, Series::from_stats(s))).collect();
    match fit_cutoff_collapse(&quantum, &TailWindow::default()) {
        Ok(q) => c.check(
            (1.6..=2.4).contains(&q.z),
            format!("quantum z={:.3}±{:.3} (t_c {:?})", q.z, q.z_err, q.tail_times.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>()),
        ),
        Err(e) => c.check(false, format!("quantum fit failed: {e}")),
    }
    c.finish()
}

fn overlay() -> Outcome {
    let (l, stats) = swap_ensembles().iter().find(|r| r.0 == 12).unwrap();
    let g = build_generator(&WalkParams::nearest(1), *l).unwrap();
    let run = g.evolve(&g.neel_profile().unwrap(), &stats.times).unwrap();
    let mut worst = (0.0f64, 0.0);
    let mut points = 0;
    for (i, &t) in stats.times.iter().enumerate() {
        if !(1.0..=50.0).contains(&t) {
            continue;
        }
        let q = *l as f64 * stats.mean[i];
        let p1 = run.profiles[i][0];
        let dev = (q - p1).abs() / p1;
        points += 1;
        if dev > worst.0 {
            worst = (dev, t);
        }
    }
    let note = format!("max relative deviation {:.3} at t={:.1} over {points} times", worst.0, worst.1);
    if worst.0 < 0.15 && points > 10 {
        Ok(note)
    } else {
        Err(note)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut c = Checks::default();
    for (l, t_max) in [(4usize, 10.0), (6, 20.0)] {
        let sp = spec(Family::SwapSu(2), l);
        let cfg = config(sp.clone(), t_max, 7, 10);
        let stats = ensemble(&cfg, 4000);
        let oracle = Oracle::new(&sp).unwrap();
        let exact = oracle.evolve(&DensityMatrix::from_state(&sp.initial_state().unwrap()), &stats.times).unwrap();
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..stats.times.len() {
            let d = (stats.mean[i] - exact.order_param[i]).abs();
            ok &= d <= 5.0 * stats.stderr[i] + 1e-12;
            if stats.stderr[i] > 0.0 {
                worst = worst.max(d / stats.stderr[i]);
            }
        }
        c.check(ok, format!("L={l}: max |mean - exact|/stderr = {worst:.2} over {} times", stats.times.len()));
    }
    // Heisenberg rates against finite differences of the exact propagator
    let h = 1e-4;
    let mut worst = 0.0f64;
    for kappa in [0.0, 0.7] {
        let mut sp = spec(Family::SwapSu(2), 4);
        sp.kappa = kappa;
        let oracle = Oracle::new(&sp).unwrap();
        for seed in 0..3 {
            let rho = random_rho(4, seed);
            let (r1, r2) = (oracle.propagate_exact(&rho, h).unwrap(), oracle.propagate_exact(&rho, 2.0 * h).unwrap());
            for a in 0..4 {
                for b in a + 1..4 {
                    let p = swap_projector(2, a, b).unwrap();
                    let f = |r: &DensityMatrix| r.expectation(&p).unwrap().re;
                    let fd = (-3.0 * f(&rho) + 4.0 * f(&r1) - f(&r2)) / (2.0 * h);
                    worst = worst.max((fd - oracle.heisenberg_rate(&rho, &p).unwrap()).abs());
                }
            }
        }
    }
    c.check(worst < 1e-6, format!("finite-difference rate error {worst:.1e}"));
    c.finish()
}

fn j_eigenstate(seed: u64) -> (QuditState, f64) {
    // singlet ⊗ singlet ⊗ (J = 1 triplet), or singlet ⊗ Dicke(4, 2) with J = 2; then
    // a random superposition of site permutations, which commute with J²
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0)];
    let kron = |a: &[C64], b: &[C64]| a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect::<Vec<C64>>();
    let (base, j) = if seed % 2 == 0 {
        let t = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        (kron(&kron(&s, &s), &t), 1.0)
    } else {
        (kron(&s, dicke_state(4, 2).unwrap().amplitudes()), 2.0)
    };
    let base = QuditState::from_amplitudes(6, 2, base).unwrap();
    let mut acc = vec![C64::new(0.0, 0.0); 64];
    for _ in 0..4 {
        let mut v = base.clone();
        for _ in 0..6 {
            let (a, b) = (rng.random_range(0..6), rng.random_range(0..6));
            if a != b {
                v.apply_local_unitary(&LocalOperator::new(vec![a, b], 2, swap_matrix(2), OpKind::Unitary).unwrap())
                    .unwrap();
            }
        }
        let c = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        acc.iter_mut().zip(v.amplitudes()).for_each(|(x, y)| *x += c * y);
    }
    (QuditState::from_amplitudes(6, 2, acc).unwrap(), j * (j + 1.0))
}

fn conservation() -> Outcome {
    let mut c = Checks::default();

    // S^z in the full space, several families and random seeds
    let mut runner =
        TestRunner::new(PropConfig { cases: 24, failure_persistence: None, max_shrink_iters: 0, ..PropConfig::default() });
    let strategy = (0usize..4, any::<u64>());
    let worst = std::cell::Cell::new(0.0f64);
    let res = runner.run(&strategy, |(k, seed)| {
        let (family, l) = [(Family::SwapSu(2), 8), (Family::SwapSu(3), 6), (Family::Fredkin, 8), (Family::Motzkin, 6)][k];
        let mut cfg = config(spec(family, l), 30.0, seed, 10);
        cfg.restrict_sector = false;
        let sz0 = cfg.protocol.initial_state().unwrap().total_sz();
        let engine = Engine::new(&cfg).unwrap();
        for i in 0..4 {
            let ts = engine.run(&cfg, i).unwrap();
            let drift = ts.sz.iter().map(|s| (s - sz0).abs()).fold(0.0, f64::max);
            worst.set(worst.get().max(drift));
            prop_assert!(drift < 1e-10, "{family} L={l} drift {drift}");
        }
        Ok(())
    });
    c.check(res.is_ok(), format!("Sz drift max {:.1e} over 96 full-space trajectories", worst.get()));

    // J² under measurements alone, from J² eigenstates
    let mut worst = 0.0f64;
    for seed in 0..6 {
        let (mut psi, j2) = j_eigenstate(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
        worst = worst.max((psi.total_spin_squared().unwrap() - j2).abs());
        for step in 0..200 {
            let a = rng.random_range(0..6);
            let b = if step % 2 == 0 { (a + 1) % 6 } else { (a + rng.random_range(1..6)) % 6 };
            psi.projective_measure(&swap_projector(2, a, b).unwrap(), rng.random(), step as f64).unwrap();
            worst = worst.max((psi.total_spin_squared().unwrap() - j2).abs());
        }
    }
    c.check(worst < 1e-10, format!("J² change under measurement {worst:.1e}"));

    // controlled runs: ensemble-mean J² does not decrease and ends at its maximum
    let mut cfg = config(spec(Family::SwapSu(2), 6), 60.0, 3, 10);
    cfg.record_j2 = true;
    let n = 2000usize;
    let len = cfg.grid().unwrap().len();
    let (mut sum, mut sq) = (vec![0.0; len - 1], vec![0.0; len - 1]);
    let mut last = 0.0;
    let mut each = |_: u64, ts: &TimeSeries| {
        let j = ts.j2.as_ref().unwrap();
        for i in 0..len - 1 {
            let d = j[i + 1] - j[i];
            sum[i] += d;
            sq[i] += d * d;
        }
        last += j[len - 1] / n as f64;
    };
    Engine::new(&cfg).unwrap().ensemble(&cfg, n, Some(&mut each)).unwrap();
    let worst_z = (0..len - 1)
        .map(|i| {
            let m = sum[i] / n as f64;
            let se = ((sq[i] / n as f64 - m * m).max(0.0) / (n - 1) as f64).sqrt();
            if se > 0.0 { m / se } else if m < -1e-12 { f64::NEG_INFINITY } else { 0.0 }
        })
        .fold(f64::INFINITY, f64::min);
    c.check(
        worst_z > -4.0 && (last - 12.0).abs() < 1e-8,
        format!("mean J² steps ≥ {worst_z:.2} stderr, final {last:.10} (max 12)"),
    );

    // dark states stay dark, with the absorption shortcut disabled
    let mut worst = 0.0f64;
    for (family, l, kind) in [
        (Family::SwapSu(2), 8, TargetKind::Dicke { up: 4 }),
        (Family::Fredkin, 8, TargetKind::AnomalousFredkin),
        (Family::Fredkin, 8, TargetKind::FredkinStationary),
        (Family::Motzkin, 6, TargetKind::MotzkinGroundPbc),
    ] {
        let mut sp = spec(family, l);
        sp.initial_state = InitialState::Target(kind);
        let mut cfg = config(sp, 50.0, 9, 10);
        cfg.absorb_tol = 0.0;
        let engine = Engine::new(&cfg).unwrap();
        for i in 0..10 {
            worst = worst.max(engine.run(&cfg, i).unwrap().order_param.iter().cloned().fold(0.0, f64::max));
        }
    }
    let mut cfg = config(spec(Family::SwapSu(2), 6), 200.0, 4, 10);
    cfg.absorb_tol = 0.0;
    let engine = Engine::new(&cfg).unwrap();
    let mut relapses = 0;
    for i in 0..100 {
        let op = engine.run(&cfg, i).unwrap().order_param;
        if let Some(k) = op.iter().position(|&x| x < 1e-12) {
            relapses += op[k..].iter().filter(|&&x| x >= 1e-12).count();
        }
    }
    c.check(worst < 1e-12 && relapses == 0, format!("dark-state order parameter ≤ {worst:.1e}, {relapses} relapses"));
    c.finish()
}

fn bootstrap(family: Family, counts: [usize; 3]) -> BootstrapExponent {
    let s: Vec<TrajectorySamples> = [6usize, 8, 10]
        .iter()
        .zip(counts)
        .map(|(&l, n)| samples(&config(spec(family, l), 5000.0, 500 + l as u64, 30), n))
        .collect();
    bootstrap_tail_exponent(&s, &TailWindow::default(), 400, 0.95, 17).unwrap()
}

fn subdiffusion() -> Outcome {
    let mut c = Checks::default();
    let swap = bootstrap(Family::SwapSu(2), [2000, 2000, 1000]);
    let fmt = |b: &BootstrapExponent| format!("z={:.2} [{:.2}, {:.2}]", b.z, b.lower, b.upper);
    c.notes.push(format!("swap2 {}", fmt(&swap)));
    for (family, counts) in [(Family::Fredkin, [2000, 2000, 1000]), (Family::Motzkin, [1000, 400, 150])] {
        let b = bootstrap(family, counts);
        c.check(b.lower > 2.0, format!("{family} {} (failed resamples {})", fmt(&b), b.failed));
        c.check(b.z > swap.z, format!("{family} z {:.2} > swap2 z {:.2}", b.z, swap.z));
    }
    c.finish()
}

fn fredkin_target() -> Outcome {
    let mut c = Checks::default();
    let mut worst = 0.0f64;
    for l in [6, 8] {
        for k in 0..=l {
            worst = worst.max(fredkin_residual(&dicke_state(l, k).unwrap()).unwrap());
        }
        worst = worst.max(fredkin_residual(&anomalous_state(l).unwrap()).unwrap());
    }
    c.check(worst < 1e-10, format!("residual {worst:.1e}"));
    let a = anomalous_state(8).unwrap();
    let d = dicke_state(8, 4).unwrap();
    let cfg = config(spec(Family::Fredkin, 8), 400.0, 21, 5);
    let engine = Engine::new(&cfg).unwrap();
    let mut min_w = f64::INFINITY;
    for i in 0..100 {
        let (_, amps) = engine.run_with_state(&cfg, i).unwrap();
        let psi = engine.expand(&amps).unwrap();
        min_w = min_w.min(span_weight(&psi, &[&a, &d]).unwrap());
    }
    c.check(min_w > 0.99, format!("min span weight {min_w:.6} over 100 trajectories"));
    c.finish()
}

fn dicke_entropies() -> Outcome {
    let mut c = Checks::default();
    let mut worst = 0.0f64;
    for l in 2..=12 {
        for k in 0..=l {
            let direct = dicke_state(l, k).unwrap().schmidt_entropy(l / 2).unwrap();
            worst = worst.max((direct - dicke_entropy(l, k, l / 2)).abs());
        }
    }
    c.check(worst < 1e-10, format!("formula vs Schmidt {worst:.1e}"));
    for l in [8usize, 10] {
        let mut cfg = config(spec(Family::SwapSu(2), l), 300.0, 30, 10);
        cfg.record_entropy = true;
        let stats = ensemble(&cfg, 200);
        let s = *stats.mean_entropy.as_ref().unwrap().last().unwrap();
        let want = dicke_entropy(l, l / 2, l / 2);
        c.check((s - want).abs() < 0.05, format!("L={l} stationary S={s:.4} vs {want:.4}"));
    }
    c.finish()
}

fn noise_floor() -> Outcome {
    let mut c = Checks::default();
    let sizes = [16usize, 24, 32, 48, 64, 96, 128];
    let (mut lnl, mut p1, mut pq, mut ph) = (vec![], vec![], vec![], vec![]);
    for &l in &sizes {
        let eta = 1.0 / (l * l) as f64;
        let mut p = WalkParams::nearest(1);
        p.eta = eta;
        let g = build_generator(&p, l).unwrap();
        let x = g.stationary_noisy().unwrap();
        lnl.push((l as f64).ln());
        p1.push((x[0] / eta).ln());
        pq.push((x[l / 4 - 1] / eta).ln());
        ph.push((x[l / 2 - 1] / eta).ln());
    }
    let (s1, sq, sh) = (slope(&lnl, &p1), slope(&lnl, &pq), slope(&lnl, &ph));
    c.check((s1 - 1.0).abs() <= 0.15, format!("P1 slope {s1:.3}"));
    c.check((sq - 2.0).abs() <= 0.15 && (sh - 2.0).abs() <= 0.15, format!("bulk slopes {sq:.3} (L/4), {sh:.3} (L/2)"));
    let mut levels = Vec::new();
    for eta in [0.01, 0.03, 0.1] {
        let mut sp = spec(Family::SwapSu(2), 8);
        sp.eta = eta;
        let stats = ensemble(&config(sp, 100.0, 40, 30), 300);
        let late: Vec<f64> = stats.times.iter().zip(&stats.mean).filter(|(t, _)| **t >= 50.0).map(|(_, m)| *m).collect();
        levels.push(late.iter().sum::<f64>() / late.len() as f64);
    }
    let rising = levels[0] > 0.0 && levels.windows(2).all(|w| w[1] > w[0]);
    c.check(rising, format!("L=8 stationary order parameter {levels:.4?} for eta 0.01, 0.03, 0.1"));
    c.finish()
}

fn dispersion() -> Outcome {
    let mut c = Checks::default();
    for (delta, want) in [(5.0, 2.0), (2.0, 1.0)] {
        let fit = dispersion_asymptotics(delta, 4096, None).unwrap();
        c.check((fit.slope - want).abs() <= 0.1, format!("Delta={delta} slope {:.4}", fit.slope));
    }
    c.finish()
}

fn scrambling() -> Outcome {
    let mut c = Checks::default();
    let taus: Vec<f64> = [0.0, 1.0, 4.0]
        .iter()
        .map(|&k| {
            let mut p = WalkParams::nearest(1);
            p.kappa = k;
            build_generator(&p, 64).unwrap().smallest_eigenvalue().unwrap()
        })
        .collect();
    c.check(taus[0] < taus[1] && taus[1] < taus[2], format!("tau(kappa=0,1,4)={:.4e}, {:.4e}, {:.4e}", taus[0], taus[1], taus[2]));
    let rho = random_rho(4, 77);
    let conj = |phi: f64, a: usize, b: usize| {
        let u = scrambling_unitary(2, a, b, phi).unwrap().embed(4).unwrap();
        &u * rho.matrix() * u.adjoint()
    };
    let (mut exact_err, mut mc_err) = (0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (a, b) in [(0, 1), (1, 3)] {
        let formula = scrambling_channel(&rho, a, b).unwrap();
        // the integrand is a trigonometric polynomial of degree 2: an 8-point rule is exact
        let mut avg = CMatrix::zeros(16, 16);
        for k in 0..8 {
            avg += conj(std::f64::consts::TAU * k as f64 / 8.0, a, b) / C64::new(8.0, 0.0);
        }
        exact_err = exact_err.max(max_abs(&(avg - formula.matrix())));
        let n = 4000;
        let mut mc = CMatrix::zeros(16, 16);
        for _ in 0..n {
            mc += conj(rng.random_range(0.0..std::f64::consts::TAU), a, b) / C64::new(n as f64, 0.0);
        }
        mc_err = mc_err.max(max_abs(&(mc - formula.matrix())));
    }
    c.check(exact_err < 1e-12, format!("phase average vs formula {exact_err:.1e}"));
    c.check(mc_err < 2e-2, format!("Monte Carlo {mc_err:.1e}"));
    c.finish()
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "all-to-all decay rate", all_to_all_rate),
        (2, "exponent plateaus and crossover", exponent_plateaus),
        (3, "diffusive exponent of the swap protocol", diffusive_exponent),
        (4, "quantum vs classical overlay", overlay),
        (5, "ensemble vs exact averaged channel", oracle_equivalence),
        (6, "conservation and dark states", conservation),
        (7, "Fredkin and Motzkin subdiffusion", subdiffusion),
        (8, "Fredkin target manifold", fredkin_target),
        (9, "Dicke entropy", dicke_entropies),
        (10, "noise floor scaling", noise_floor),
        (11, "dispersion regimes", dispersion),
        (12, "scrambling acceleration", scrambling),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if let Some(f) = &filter {
            if *f != n.to_string() && !name.contains(f.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("criterion {n:>2} PASS  {name}: {note} ({secs:.0} s)"),
            Err(note) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {note} ({secs:.0} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
