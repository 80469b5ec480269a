//! Control protocols: measured projectors, feedback and scrambling gates,
//! measurement noise, initial states and the target (dark) states.
//!
//! Site labels are periodic. Bond `ℓ` of a pair protocol is `(ℓ, ℓ+1)`; the
//! Fredkin label `ℓ` is the triple `(ℓ−1, ℓ, ℓ+1)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{lowest_eigenpairs, LanczosOptions};
use crate::linalg::{diag, identity, kernel_projector, kron, swap_matrix, CMatrix, C64, I, ONE, ZERO};
use crate::sector::Sector;
use crate::state::{LocalOperator, MeasurementRecord, OpKind, Outcome, QuditState};
use crate::words::motzkin_height_profile;

/// Kernel/complement split threshold for positive local operators.
pub const KERNEL_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    /// Antisymmetric-pair measurements of SU(N) spins, `N ∈ {2, 3}`.
    SwapSu(usize),
    Fredkin,
    Motzkin,
}

impl Family {
    pub fn local_dim(&self) -> usize {
        match self {
            Family::SwapSu(n) => *n,
            Family::Fredkin => 2,
            Family::Motzkin => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::SwapSu(n) => write!(f, "swap{n}"),
            Family::Fredkin => write!(f, "fredkin"),
            Family::Motzkin => write!(f, "motzkin"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swap2" | "swap" | "su2" => Ok(Family::SwapSu(2)),
            "swap3" | "su3" => Ok(Family::SwapSu(3)),
            "fredkin" => Ok(Family::Fredkin),
            "motzkin" => Ok(Family::Motzkin),
            other => Err(Error::config("family", format!("unknown family `{other}` (swap2, swap3, fredkin, motzkin)"))),
        }
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

/// Which site of a measured support receives the feedback unitary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSiteRule {
    /// Left site of a pair; centre of a Fredkin triple.
    #[default]
    Default,
    /// Right site of a pair; left site of a Fredkin triple.
    Alternative,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FredkinMode {
    /// Binary measurement of `1 − K_ℓ`, `K_ℓ` the kernel projector of `F_ℓ`.
    #[default]
    Kernel,
    /// The two controlled-singlet projectors of `F_ℓ`, measured one after the other.
    SequentialCswap,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Néel for pair/Fredkin protocols, all-zero for Motzkin.
    #[default]
    Default,
    Neel,
    AllZero,
    Digits(Vec<usize>),
    Target(TargetKind),
}

/// Declarative description of one control protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub family: Family,
    #[serde(rename = "L")]
    pub num_sites: usize,
    /// Local dimension; optional, must agree with the family if given.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub local_dim: Option<usize>,
    /// Range exponent of pair measurements; `None` means nearest neighbours.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub feedback_site_rule: FeedbackSiteRule,
    #[serde(default)]
    pub fredkin_measurement_mode: FredkinMode,
    #[serde(default)]
    pub initial_state: InitialState,
}

/// One projective measurement followed by conditional feedback.
#[derive(Clone, Debug)]
pub struct MeasurementStep {
    pub projector: LocalOperator,
    pub feedback: LocalOperator,
}

impl ProtocolSpec {
    pub fn new(family: Family, num_sites: usize) -> Self {
        ProtocolSpec {
            family,
            num_sites,
            local_dim: None,
            delta: None,
            kappa: 0.0,
            eta: 0.0,
            feedback_site_rule: FeedbackSiteRule::Default,
            fredkin_measurement_mode: FredkinMode::Kernel,
            initial_state: InitialState::Default,
        }
    }

    pub fn local_dim(&self) -> usize {
        self.family.local_dim()
    }

    /// Feedback strength: `PVP = √(1−λ)P`. All built-in feedbacks map the
    /// measured subspace out of itself, so `λ = 1`.
    pub fn lambda(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.num_sites;
        if let Family::SwapSu(n) = self.family {
            if !(2..=3).contains(&n) {
                return Err(Error::config("family", format!("SU({n}) pair measurements need N = 2 or 3")));
            }
        }
        if let Some(n) = self.local_dim {
            if n != self.local_dim() {
                return Err(Error::config("N", format!("family {} has N = {}, got {n}", self.family, self.local_dim())));
            }
        }
        let min_l = if self.family == Family::Fredkin { 3 } else { 2 };
        if l < min_l {
            return Err(Error::config("L", format!("{} needs at least {min_l} sites", self.family)));
        }
        if let Some(d) = self.delta {
            if !matches!(self.family, Family::SwapSu(_)) {
                return Err(Error::config("delta", "long-range measurements exist only for swap protocols"));
            }
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config("delta", format!("need a finite range exponent ≥ 0, got {d}")));
            }
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa", format!("need κ ≥ 0, got {}", self.kappa)));
        }
        if self.kappa > 0.0 && !matches!(self.family, Family::SwapSu(_)) {
            return Err(Error::config("kappa", "scrambling gates preserve the target only for swap protocols"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", format!("need η ≥ 0, got {}", self.eta)));
        }
        if self.fredkin_measurement_mode == FredkinMode::SequentialCswap && self.family != Family::Fredkin {
            return Err(Error::config("fredkin_measurement_mode", "only meaningful for the fredkin family"));
        }
        if let InitialState::Digits(d) = &self.initial_state {
            if d.len() != l {
                return Err(Error::config("initial_state", format!("{} digits for {l} sites", d.len())));
            }
        }
        Ok(())
    }

    fn site(&self, i: isize) -> usize {
        i.rem_euclid(self.num_sites as isize) as usize
    }

    /// Sites of the measured operator with label `ℓ`.
    pub fn support(&self, label: usize) -> Vec<usize> {
        let l = label as isize;
        match self.family {
            Family::Fredkin => vec![self.site(l - 1), self.site(l), self.site(l + 1)],
            _ => vec![self.site(l), self.site(l + 1)],
        }
    }

    /// Measurement event at label `ℓ` (nearest-neighbour geometry).
    pub fn channel(&self, label: usize) -> Result<Vec<MeasurementStep>> {
        let support = self.support(label);
        match self.family {
            Family::SwapSu(n) => {
                let projector = swap_projector(n, support[0], support[1])?;
                let feedback = feedback_unitary(self, &support)?;
                Ok(vec![MeasurementStep { projector, feedback }])
            }
            Family::Motzkin => {
                let projector = motzkin_projector(self.num_sites, label)?;
                let feedback = feedback_unitary(self, &support)?;
                Ok(vec![MeasurementStep { projector, feedback }])
            }
            Family::Fredkin => {
                let feedback = feedback_unitary(self, &support)?;
                match self.fredkin_measurement_mode {
                    FredkinMode::Kernel => {
                        let projector = fredkin_kernel_projector(self.num_sites, label)?.complement()?;
                        Ok(vec![MeasurementStep { projector, feedback }])
                    }
                    FredkinMode::SequentialCswap => {
                        let (t1, t2) = fredkin_cswap_projectors(self.num_sites, label)?;
                        Ok(vec![
                            MeasurementStep { projector: t1, feedback: feedback.clone() },
                            MeasurementStep { projector: t2, feedback },
                        ])
                    }
                }
            }
        }
    }

    /// Measurement event on the pair `(ℓ, m)` of a long-range swap protocol.
    pub fn pair_channel(&self, l: usize, m: usize) -> Result<Vec<MeasurementStep>> {
        let Family::SwapSu(n) = self.family else {
            return Err(Error::config("delta", "pair channels exist only for swap protocols"));
        };
        let projector = swap_projector(n, l, m)?;
        let feedback = feedback_unitary(self, &[l, m])?;
        Ok(vec![MeasurementStep { projector, feedback }])
    }

    /// The projectors whose mean is the order parameter, one per label.
    pub fn order_param_projectors(&self) -> Result<Vec<LocalOperator>> {
        (0..self.num_sites)
            .map(|label| match self.family {
                Family::SwapSu(n) => {
                    let s = self.support(label);
                    swap_projector(n, s[0], s[1])
                }
                Family::Motzkin => motzkin_projector(self.num_sites, label),
                Family::Fredkin => fredkin_kernel_projector(self.num_sites, label)?.complement(),
            })
            .collect()
    }

    /// Starting state of a trajectory.
    pub fn initial_state(&self) -> Result<QuditState> {
        let l = self.num_sites;
        let n = self.local_dim();
        match &self.initial_state {
            InitialState::Default => match self.family {
                Family::Motzkin => QuditState::product(n, &vec![1; l]),
                _ => neel(n, l),
            },
            InitialState::Neel => neel(n, l),
            InitialState::AllZero => {
                if n != 3 {
                    return Err(Error::config("initial_state", "all_zero needs spin-1 sites"));
                }
                QuditState::product(n, &vec![1; l])
            }
            InitialState::Digits(d) => QuditState::product(n, d),
            InitialState::Target(kind) => {
                let t = target_state(*kind, l)?;
                if t.state.local_dim() != n {
                    return Err(Error::config("initial_state", "target state has the wrong local dimension"));
                }
                Ok(t.state)
            }
        }
    }
}

fn neel(n: usize, l: usize) -> Result<QuditState> {
    if l % 2 != 0 {
        return Err(Error::config("initial_state", format!("Néel state needs an even number of sites, got {l}")));
    }
    let digits: Vec<usize> = (0..l).map(|i| if i % 2 == 0 { 0 } else { n - 1 }).collect();
    QuditState::product(n, &digits)
}

/// `½(1 − SWAP)` on `(ℓ, m)`: projector onto the antisymmetric pair states.
pub fn swap_projector(n: usize, l: usize, m: usize) -> Result<LocalOperator> {
    if l == m {
        return Err(Error::DuplicateSite(l));
    }
    let p = (identity(n * n) - swap_matrix(n)) * C64::new(0.5, 0.0);
    LocalOperator::new(vec![l, m], n, p, OpKind::Projector)
}

/// `exp(iπ/2·Z)` for spin-1 (`diag(i, 1, −i)`), `exp(iπ/2·σ^z)` for Fredkin qubits.
fn quarter_turn(n: usize) -> CMatrix {
    match n {
        2 => diag(&[I, -I]),
        _ => diag(&[I, ONE, -I]),
    }
}

/// Feedback unitary for a measurement on `measured` (pair or Fredkin triple).
pub fn feedback_unitary(spec: &ProtocolSpec, measured: &[usize]) -> Result<LocalOperator> {
    let alt = spec.feedback_site_rule == FeedbackSiteRule::Alternative;
    let (site, matrix) = match spec.family {
        Family::SwapSu(2) => (measured[usize::from(alt)], diag(&[ONE, -ONE])),
        Family::SwapSu(n) => (measured[usize::from(alt)], quarter_turn(n)),
        Family::Motzkin => (measured[usize::from(alt)], quarter_turn(3)),
        Family::Fredkin => {
            if measured.len() != 3 {
                return Err(Error::DimensionMismatch("Fredkin feedback needs the measured triple".into()));
            }
            (if alt { measured[0] } else { measured[1] }, quarter_turn(2))
        }
    };
    LocalOperator::new(vec![site], spec.local_dim(), matrix, OpKind::Unitary)
}

fn up_down_projectors() -> (CMatrix, CMatrix) {
    (diag(&[ONE, ZERO]), diag(&[ZERO, ONE]))
}

fn fredkin_matrix() -> CMatrix {
    let (up, down) = up_down_projectors();
    let p = (identity(4) - swap_matrix(2)) * C64::new(0.5, 0.0);
    let two = C64::new(2.0, 0.0);
    (kron(&down, &p) + kron(&p, &up)) * two
}

/// `F_ℓ = (1 − σ^z_{ℓ−1})P_{ℓ,ℓ+1} + P_{ℓ−1,ℓ}(1 + σ^z_{ℓ+1})` on `(ℓ−1, ℓ, ℓ+1)`.
pub fn fredkin_operator(num_sites: usize, label: usize) -> Result<LocalOperator> {
    let spec = ProtocolSpec::new(Family::Fredkin, num_sites);
    spec.validate()?;
    LocalOperator::new(spec.support(label), 2, fredkin_matrix(), OpKind::HermitianPsd)
}

/// Projector onto the null space of `F_ℓ`.
pub fn fredkin_kernel_projector(num_sites: usize, label: usize) -> Result<LocalOperator> {
    let f = fredkin_operator(num_sites, label)?;
    let k = kernel_projector(f.matrix(), KERNEL_THRESHOLD);
    LocalOperator::new(f.support().to_vec(), 2, k, OpKind::Projector)
}

/// The two terms of `F_ℓ` as projectors: `|↓⟩⟨↓|_{ℓ−1}⊗P_{ℓ,ℓ+1}` and `P_{ℓ−1,ℓ}⊗|↑⟩⟨↑|_{ℓ+1}`.
pub fn fredkin_cswap_projectors(num_sites: usize, label: usize) -> Result<(LocalOperator, LocalOperator)> {
    let spec = ProtocolSpec::new(Family::Fredkin, num_sites);
    spec.validate()?;
    let (up, down) = up_down_projectors();
    let p = (identity(4) - swap_matrix(2)) * C64::new(0.5, 0.0);
    let support = spec.support(label);
    Ok((
        LocalOperator::new(support.clone(), 2, kron(&down, &p), OpKind::Projector)?,
        LocalOperator::new(support, 2, kron(&p, &up), OpKind::Projector)?,
    ))
}

/// Controlled swap on three qubits `(c, a, b)`: swaps `a, b` when `c` is ↑.
pub fn cswap_matrix() -> CMatrix {
    let (up, down) = up_down_projectors();
    kron(&up, &swap_matrix(2)) + kron(&down, &identity(4))
}

fn motzkin_vectors() -> [[C64; 9]; 3] {
    // digits 0, 1, 2 = ↑, 0, ↓; pair index 3a + b
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut u = [ZERO; 9];
    u[1] = r; // ↑0
    u[3] = -r; // 0↑
    let mut d = [ZERO; 9];
    d[7] = r; // ↓0
    d[5] = -r; // 0↓
    let mut f = [ZERO; 9];
    f[2] = r; // ↑↓
    f[4] = -r; // 00
    [u, d, f]
}

/// `M_ℓ = |U⟩⟨U| + |D⟩⟨D| + |F⟩⟨F|` on `(ℓ, ℓ+1)`.
pub fn motzkin_projector(num_sites: usize, label: usize) -> Result<LocalOperator> {
    let spec = ProtocolSpec::new(Family::Motzkin, num_sites);
    spec.validate()?;
    let mut m = CMatrix::zeros(9, 9);
    for v in motzkin_vectors() {
        for i in 0..9 {
            for j in 0..9 {
                m[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    LocalOperator::new(spec.support(label), 3, m, OpKind::Projector)
}

/// `exp(iφ·SWAP) = cos φ + i sin φ·SWAP` on `(ℓ, m)`.
pub fn scrambling_unitary(n: usize, l: usize, m: usize, phi: f64) -> Result<LocalOperator> {
    let u = identity(n * n) * C64::new(phi.cos(), 0.0) + swap_matrix(n) * C64::new(0.0, phi.sin());
    LocalOperator::new(vec![l, m], n, u, OpKind::Unitary)
}

/// Probability that a measurement result is misread, `½(1 − e^{−2η})`.
pub fn error_probability(eta: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * eta).exp())
}

/// Whether feedback follows a measurement. A fired projector is corrected
/// unless misread; a quiet one is wrongly corrected when misread.
pub fn noisy_outcome_filter(record: &MeasurementRecord, eta: f64, draw: f64) -> Result<bool> {
    if !(eta >= 0.0) {
        return Err(Error::config("eta", format!("need η ≥ 0, got {eta}")));
    }
    let misread = draw < error_probability(eta);
    Ok(match record.outcome {
        Outcome::One => !misread,
        Outcome::Zero => misread,
    })
}

/// Normalized pair rates `γ_r ∝ min(r, L−r)^{−Δ}` for `r = 0..L` with `γ_0 = 0`
/// and `Σ_{r=1}^{L−1} γ_r = 1`.
pub fn long_range_rates(num_sites: usize, delta: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..num_sites)
        .map(|r| if r == 0 { 0.0 } else { (r.min(num_sites - r) as f64).powf(-delta) })
        .collect();
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    g
}

/// Draws measured pairs `(ℓ, ℓ+r)` with `r ∝ γ_r` and uniform `ℓ`.
#[derive(Clone, Debug)]
pub struct LongRangeSampler {
    num_sites: usize,
    cdf: Vec<f64>,
}

impl LongRangeSampler {
    pub fn new(num_sites: usize, delta: f64) -> Result<Self> {
        if num_sites < 2 {
            return Err(Error::config("L", "need at least 2 sites"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::config("delta", format!("need a finite range exponent ≥ 0, got {delta}")));
        }
        let g = long_range_rates(num_sites, delta);
        let mut acc = 0.0;
        let cdf = g[1..]
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Ok(LongRangeSampler { num_sites, cdf })
    }

    /// Probability of relative distance `r ∈ 1..L`.
    pub fn probability(&self, r: usize) -> f64 {
        match r {
            0 => 0.0,
            1 => self.cdf[0],
            _ if r < self.num_sites => self.cdf[r - 1] - self.cdf[r - 2],
            _ => 0.0,
        }
    }

    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.cdf.len() - 1) + 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let r = self.sample_distance(rng);
        let l = rng.random_range(0..self.num_sites);
        (l, (l + r) % self.num_sites)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Symmetric qubit state with `up` spins up.
    Dicke { up: usize },
    AnomalousFredkin,
    /// Normalized `|A⟩ − |D(L, L/2)⟩`.
    FredkinStationary,
    /// Zero-charge null vector of `Σ_ℓ M_{ℓ,ℓ+1}` on the ring.
    MotzkinGroundPbc,
}

#[derive(Clone, Debug)]
pub struct TargetState {
    pub kind: TargetKind,
    pub state: QuditState,
}

pub fn dicke_state(num_sites: usize, up: usize) -> Result<QuditState> {
    if up > num_sites {
        return Err(Error::config("k", format!("{up} up spins on {num_sites} sites")));
    }
    if num_sites > 24 {
        return Err(Error::config("L", "Dicke states are built for at most 24 qubits"));
    }
    let dim = 1usize << num_sites;
    let amps: Vec<C64> = (0..dim)
        .map(|i| if (num_sites - (i.count_ones() as usize)) == up { ONE } else { ZERO })
        .collect();
    QuditState::from_amplitudes(num_sites, 2, amps)
}

/// `C(L, L/2)^{−1/2} Σ_ω (−1)^{m(ω)}|ω⟩` over zero-charge configurations,
/// `m(ω)` the maximal height of the path of `ω`.
pub fn anomalous_state(num_sites: usize) -> Result<QuditState> {
    if num_sites % 2 != 0 || num_sites > 24 {
        return Err(Error::config("L", format!("need even L ≤ 24, got {num_sites}")));
    }
    let dim = 1usize << num_sites;
    let amps: Vec<C64> = (0..dim)
        .map(|i| {
            if i.count_ones() as usize * 2 != num_sites {
                return ZERO;
            }
            let digits = crate::state::index_digits(2, num_sites, i);
            let m = motzkin_height_profile(2, &digits).max_height;
            if m % 2 == 0 {
                ONE
            } else {
                -ONE
            }
        })
        .collect();
    QuditState::from_amplitudes(num_sites, 2, amps)
}

/// Zero-charge kernel of the periodic Motzkin chain. Errors with
/// [`Error::DegenerateKernel`] unless the kernel is one-dimensional.
pub fn motzkin_ground_pbc(num_sites: usize) -> Result<QuditState> {
    if num_sites > 14 {
        return Err(Error::config("L", "the Motzkin target is built for at most 14 sites"));
    }
    let spec = ProtocolSpec::new(Family::Motzkin, num_sites);
    spec.validate()?;
    let sector = Sector::new(num_sites, 3, Some(0))?;
    let mut ops = Vec::new();
    for label in 0..num_sites {
        let m = motzkin_projector(num_sites, label)?;
        let table = sector.table(m.support())?;
        let comp = sector.compile(&m, &table)?;
        ops.push((table, comp));
    }
    let dim = sector.dim();
    let matvec = |x: &[C64], y: &mut [C64]| {
        y.iter_mut().for_each(|v| *v = ZERO);
        let mut tmp = vec![ZERO; x.len()];
        for (table, comp) in &ops {
            tmp.copy_from_slice(x);
            comp.apply(table, &mut tmp);
            for (a, b) in y.iter_mut().zip(&tmp) {
                *a += b;
            }
        }
    };
    let (values, vector) = if dim <= 2048 {
        let mut h = CMatrix::zeros(dim, dim);
        let mut e = vec![ZERO; dim];
        let mut col = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = ONE;
            matvec(&e, &mut col);
            e[j] = ZERO;
            for i in 0..dim {
                h[(i, j)] = col[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().take(2).map(|&k| eig.eigenvalues[k]).collect();
        let v: Vec<C64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
        (values, v)
    } else {
        let opts = LanczosOptions { tol: 1e-11, krylov_dim: 250, ..Default::default() };
        let res = lowest_eigenpairs(dim, 2, matvec, opts)?;
        let v = res.vectors[0].clone();
        (res.values, v)
    };
    let kernel_dim = values.iter().filter(|v| v.abs() < 1e-8).count();
    if kernel_dim != 1 {
        return Err(Error::DegenerateKernel(kernel_dim));
    }
    // fix the global phase: largest amplitude real positive
    let (_, big) = vector.iter().fold((0.0, ONE), |(m, z), v| if v.norm() > m { (v.norm(), *v) } else { (m, z) });
    let phase = big.conj() / big.norm();
    let v: Vec<C64> = vector.iter().map(|z| z * phase).collect();
    sector.expand(&v)
}

pub fn target_state(kind: TargetKind, num_sites: usize) -> Result<TargetState> {
    let state = match kind {
        TargetKind::Dicke { up } => dicke_state(num_sites, up)?,
        TargetKind::AnomalousFredkin => anomalous_state(num_sites)?,
        TargetKind::FredkinStationary => {
            let a = anomalous_state(num_sites)?;
            let d = dicke_state(num_sites, num_sites / 2)?;
            let amps = a.amplitudes().iter().zip(d.amplitudes()).map(|(x, y)| x - y).collect();
            QuditState::from_amplitudes(num_sites, 2, amps)?
        }
        TargetKind::MotzkinGroundPbc => motzkin_ground_pbc(num_sites)?,
    };
    Ok(TargetState { kind, state })
}

/// Largest `⟨P_α⟩` over the order-parameter projectors of `spec`.
pub fn max_projector_expectation(spec: &ProtocolSpec, state: &QuditState) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in spec.order_param_projectors()? {
        worst = worst.max(state.expectation(&p)?);
    }
    Ok(worst)
}

/// `‖F_ℓ ψ‖_∞` for every label of a periodic Fredkin chain.
pub fn fredkin_residual(state: &QuditState) -> Result<f64> {
    let l = state.num_sites();
    let mut worst = 0.0f64;
    for label in 0..l {
        let f = fredkin_operator(l, label)?;
        let mut v = state.amplitudes().to_vec();
        let st = crate::state::Stencil::new(l, 2, f.support());
        crate::state::apply_dense(&mut v, &st, f.matrix());
        worst = worst.max(v.iter().fold(0.0, |m, z| m.max(z.norm())));
    }
    Ok(worst)
}

/// Digits of a Néel configuration; also used to seed classical walks.
pub fn neel_digits(n: usize, l: usize) -> Vec<usize> {
    (0..l).map(|i| if i % 2 == 0 { 0 } else { n - 1 }).collect()
}
