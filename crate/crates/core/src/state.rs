//! Dense state vectors of `L` qudits with local operator application,
//! projective measurement and entanglement/charge observables.
//!
//! Basis convention: site 0 is the most significant base-`N` digit. For
//! qubits digit 0 is ↑ and 1 is ↓; for spin-1 the digits 0, 1, 2 are ↑, 0, ↓.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{identity, max_abs, CMatrix, C64, ZERO};

const OP_TOL: f64 = 1e-12;

/// Structural tag of a [`LocalOperator`], checked on construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Unitary,
    Projector,
    HermitianPsd,
}

/// A dense `N^k × N^k` matrix acting on `k ≤ 3` distinct sites.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    support: Vec<usize>,
    local_dim: usize,
    matrix: CMatrix,
    kind: OpKind,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>, local_dim: usize, matrix: CMatrix, kind: OpKind) -> Result<Self> {
        if support.is_empty() || support.len() > 3 {
            return Err(Error::InvalidOperator(format!(
                "support must have 1 to 3 sites, got {}",
                support.len()
            )));
        }
        for (i, s) in support.iter().enumerate() {
            if support[..i].contains(s) {
                return Err(Error::DuplicateSite(*s));
            }
        }
        if !(2..=3).contains(&local_dim) {
            return Err(Error::UnsupportedLocalDim(local_dim));
        }
        let dim = local_dim.pow(support.len() as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "operator on {} sites needs a {dim}x{dim} matrix, got {}x{}",
                support.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        match kind {
            OpKind::Unitary => {
                let dev = max_abs(&(matrix.adjoint() * &matrix - identity(dim)));
                if dev > OP_TOL {
                    return Err(Error::NotUnitary(dev));
                }
            }
            OpKind::Projector => {
                let herm = max_abs(&(matrix.adjoint() - &matrix));
                if herm > OP_TOL {
                    return Err(Error::NotHermitian(herm));
                }
                let idem = max_abs(&(&matrix * &matrix - &matrix));
                if idem > OP_TOL {
                    return Err(Error::NotProjector(idem));
                }
            }
            OpKind::HermitianPsd => {
                let herm = max_abs(&(matrix.adjoint() - &matrix));
                if herm > OP_TOL {
                    return Err(Error::NotHermitian(herm));
                }
                let min_eig = nalgebra::SymmetricEigen::new(matrix.clone())
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if min_eig < -1e-10 {
                    return Err(Error::InvalidOperator(format!(
                        "negative eigenvalue {min_eig:.3e} in a positive operator"
                    )));
                }
            }
        }
        Ok(LocalOperator { support, local_dim, matrix, kind })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    /// Same matrix on different sites.
    pub fn moved_to(&self, support: Vec<usize>) -> Result<Self> {
        if support.len() != self.support.len() {
            return Err(Error::DimensionMismatch("support length changed".into()));
        }
        for (i, s) in support.iter().enumerate() {
            if support[..i].contains(s) {
                return Err(Error::DuplicateSite(*s));
            }
        }
        Ok(LocalOperator { support, ..self.clone() })
    }

    /// `1 − P` for a projector.
    pub fn complement(&self) -> Result<Self> {
        if self.kind != OpKind::Projector {
            return Err(Error::InvalidOperator("complement of a non-projector".into()));
        }
        let dim = self.matrix.nrows();
        Ok(LocalOperator { matrix: identity(dim) - &self.matrix, ..self.clone() })
    }

    fn check_fits(&self, num_sites: usize, local_dim: usize) -> Result<()> {
        if local_dim != self.local_dim {
            return Err(Error::DimensionMismatch(format!(
                "operator local dimension {} vs state {}",
                self.local_dim, local_dim
            )));
        }
        for &s in &self.support {
            if s >= num_sites {
                return Err(Error::SiteOutOfRange { site: s, len: num_sites });
            }
        }
        Ok(())
    }

    /// Embedding into the full `N^L`-dimensional space (small chains only).
    pub fn embed(&self, num_sites: usize) -> Result<CMatrix> {
        self.check_fits(num_sites, self.local_dim)?;
        let dim = self.local_dim.pow(num_sites as u32);
        let st = Stencil::new(num_sites, self.local_dim, &self.support);
        let mut out = CMatrix::zeros(dim, dim);
        st.for_each_base(|base| {
            for (a, &oa) in st.offsets.iter().enumerate() {
                for (b, &ob) in st.offsets.iter().enumerate() {
                    out[(base + oa, base + ob)] = self.matrix[(a, b)];
                }
            }
        });
        Ok(out)
    }
}

/// Index bookkeeping for applying a `k`-site matrix to a dense vector:
/// `offsets[a]` is the flat offset of local configuration `a`, and the
/// odometer over `rest_strides` enumerates the remaining sites.
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    pub(crate) offsets: Vec<usize>,
    rest_strides: Vec<usize>,
    n: usize,
    count: usize,
}

impl Stencil {
    pub(crate) fn new(num_sites: usize, n: usize, support: &[usize]) -> Self {
        let strides: Vec<usize> = (0..num_sites).map(|j| n.pow((num_sites - 1 - j) as u32)).collect();
        let k = support.len();
        let dim = n.pow(k as u32);
        let offsets = (0..dim)
            .map(|mut a| {
                let mut off = 0;
                for j in (0..k).rev() {
                    off += (a % n) * strides[support[j]];
                    a /= n;
                }
                off
            })
            .collect();
        let rest_strides = (0..num_sites).filter(|j| !support.contains(j)).map(|j| strides[j]).collect();
        Stencil { offsets, rest_strides, n, count: n.pow((num_sites - k) as u32) }
    }

    pub(crate) fn for_each_base(&self, mut f: impl FnMut(usize)) {
        let mut digits = vec![0usize; self.rest_strides.len()];
        let mut base = 0usize;
        for _ in 0..self.count {
            f(base);
            for (d, &s) in digits.iter_mut().zip(&self.rest_strides) {
                *d += 1;
                base += s;
                if *d < self.n {
                    break;
                }
                base -= self.n * s;
                *d = 0;
            }
        }
    }
}

/// Apply `m` on the stencil to `amps` in place.
pub(crate) fn apply_dense(amps: &mut [C64], st: &Stencil, m: &CMatrix) {
    let dim = st.offsets.len();
    let mut buf = [ZERO; 27];
    let mut out = [ZERO; 27];
    st.for_each_base(|base| {
        for (a, &o) in st.offsets.iter().enumerate() {
            buf[a] = amps[base + o];
        }
        for a in 0..dim {
            let mut acc = ZERO;
            for b in 0..dim {
                acc += m[(a, b)] * buf[b];
            }
            out[a] = acc;
        }
        for (a, &o) in st.offsets.iter().enumerate() {
            amps[base + o] = out[a];
        }
    });
}

fn expect_dense(amps: &[C64], st: &Stencil, m: &CMatrix) -> C64 {
    let dim = st.offsets.len();
    let mut buf = [ZERO; 27];
    let mut acc = ZERO;
    st.for_each_base(|base| {
        for (a, &o) in st.offsets.iter().enumerate() {
            buf[a] = amps[base + o];
        }
        for a in 0..dim {
            let mut row = ZERO;
            for b in 0..dim {
                row += m[(a, b)] * buf[b];
            }
            acc += buf[a].conj() * row;
        }
    });
    acc
}

/// Outcome of a binary projective measurement. `One` means the measured
/// projector fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub sites: Vec<usize>,
    pub outcome: Outcome,
    /// Pre-collapse probability of the recorded outcome.
    pub born_probability: f64,
    pub time: f64,
}

/// Normalized amplitude vector of an `L`-site chain with local dimension 2 or 3.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    num_sites: usize,
    local_dim: usize,
    amps: Vec<C64>,
}

fn check_shape(num_sites: usize, local_dim: usize) -> Result<()> {
    if !(2..=3).contains(&local_dim) {
        return Err(Error::UnsupportedLocalDim(local_dim));
    }
    if num_sites < 2 {
        return Err(Error::config("L", format!("need at least 2 sites, got {num_sites}")));
    }
    if (num_sites as f64) * (local_dim as f64).log2() > 40.0 {
        return Err(Error::config("L", format!("{local_dim}^{num_sites} amplitudes do not fit in memory")));
    }
    Ok(())
}

/// Twice the `z` spin of a local digit: `(N−1) − 2d`.
pub fn site_charge2(local_dim: usize, digit: usize) -> i64 {
    (local_dim as i64 - 1) - 2 * digit as i64
}

impl QuditState {
    /// Product state from a list of digits, one per site.
    pub fn product(local_dim: usize, digits: &[usize]) -> Result<Self> {
        check_shape(digits.len(), local_dim)?;
        let idx = basis_index(local_dim, digits)?;
        let mut amps = vec![ZERO; local_dim.pow(digits.len() as u32)];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(QuditState { num_sites: digits.len(), local_dim, amps })
    }

    /// State from raw amplitudes, normalized on the way in.
    pub fn from_amplitudes(num_sites: usize, local_dim: usize, amps: Vec<C64>) -> Result<Self> {
        check_shape(num_sites, local_dim)?;
        let dim = local_dim.pow(num_sites as u32);
        if amps.len() != dim {
            return Err(Error::DimensionMismatch(format!("expected {dim} amplitudes, got {}", amps.len())));
        }
        let mut s = QuditState { num_sites, local_dim, amps };
        let n = s.norm();
        if !n.is_finite() || n < 1e-150 {
            return Err(Error::Numerical(format!("cannot normalize a vector of norm {n:e}")));
        }
        s.scale(1.0 / n);
        Ok(s)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scale(&mut self, f: f64) {
        for z in &mut self.amps {
            *z *= f;
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuditState) -> Result<C64> {
        if self.num_sites != other.num_sites || self.local_dim != other.local_dim {
            return Err(Error::DimensionMismatch(format!(
                "states of shape ({}, {}) and ({}, {})",
                self.num_sites, self.local_dim, other.num_sites, other.local_dim
            )));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        index_digits(self.local_dim, self.num_sites, index)
    }

    pub fn apply_local_unitary(&mut self, op: &LocalOperator) -> Result<()> {
        if op.kind != OpKind::Unitary {
            let dev = max_abs(&(op.matrix.adjoint() * &op.matrix - identity(op.matrix.nrows())));
            if dev > OP_TOL {
                return Err(Error::NotUnitary(dev));
            }
        }
        op.check_fits(self.num_sites, self.local_dim)?;
        let st = Stencil::new(self.num_sites, self.local_dim, &op.support);
        apply_dense(&mut self.amps, &st, &op.matrix);
        Ok(())
    }

    /// `⟨ψ|O|ψ⟩` for hermitian `O`.
    pub fn expectation(&self, op: &LocalOperator) -> Result<f64> {
        let herm = max_abs(&(op.matrix.adjoint() - &op.matrix));
        if herm > OP_TOL {
            return Err(Error::NotHermitian(herm));
        }
        op.check_fits(self.num_sites, self.local_dim)?;
        let st = Stencil::new(self.num_sites, self.local_dim, &op.support);
        let v = expect_dense(&self.amps, &st, &op.matrix);
        if v.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!("expectation has imaginary part {:.3e}", v.im)));
        }
        Ok(v.re)
    }

    /// Born-rule measurement of a projector: outcome `One` iff `draw < ⟨P⟩`.
    /// The state is collapsed and divided by its exact post-collapse norm.
    pub fn projective_measure(&mut self, proj: &LocalOperator, draw: f64, time: f64) -> Result<MeasurementRecord> {
        if proj.kind != OpKind::Projector {
            return Err(Error::InvalidOperator("projective measurement needs a projector".into()));
        }
        let p = self.expectation(proj)?;
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        let p = p.clamp(0.0, 1.0);
        let outcome = if draw < p { Outcome::One } else { Outcome::Zero };
        let st = Stencil::new(self.num_sites, self.local_dim, &proj.support);
        let mut projected = self.amps.clone();
        apply_dense(&mut projected, &st, &proj.matrix);
        if outcome == Outcome::Zero {
            for (q, a) in projected.iter_mut().zip(&self.amps) {
                *q = a - *q;
            }
        }
        let n = projected.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-14 {
            return Err(Error::NullCollapse(n));
        }
        self.amps = projected;
        self.scale(1.0 / n);
        let born_probability = if outcome == Outcome::One { p } else { 1.0 - p };
        Ok(MeasurementRecord { sites: proj.support.clone(), outcome, born_probability, time })
    }

    /// Von Neumann entropy (nats) of sites `[0, cut)`.
    pub fn schmidt_entropy(&self, cut: usize) -> Result<f64> {
        if cut == 0 || cut >= self.num_sites {
            return Err(Error::CutOutOfRange { cut, len: self.num_sites });
        }
        let rows = self.local_dim.pow(cut as u32);
        let cols = self.amps.len() / rows;
        let m = DMatrix::from_row_slice(rows, cols, &self.amps);
        let sv = m.singular_values();
        Ok(entropy_from_singular_values(sv.iter().copied()))
    }

    /// `⟨S^z_tot⟩`: ½Σσ^z for qubits, ΣẐ for spin-1.
    pub fn total_sz(&self) -> f64 {
        let mut acc = 0.0;
        for (i, z) in self.amps.iter().enumerate() {
            let w = z.norm_sqr();
            if w == 0.0 {
                continue;
            }
            acc += w * charge2_of_index(self.local_dim, self.num_sites, i) as f64;
        }
        0.5 * acc
    }

    /// `⟨SWAP_{ℓ,m}⟩`.
    pub fn swap_expectation(&self, l: usize, m: usize) -> Result<f64> {
        for s in [l, m] {
            if s >= self.num_sites {
                return Err(Error::SiteOutOfRange { site: s, len: self.num_sites });
            }
        }
        if l == m {
            return Err(Error::DuplicateSite(l));
        }
        let n = self.local_dim;
        let sl = n.pow((self.num_sites - 1 - l) as u32);
        let sm = n.pow((self.num_sites - 1 - m) as u32);
        let mut acc = ZERO;
        for (i, z) in self.amps.iter().enumerate() {
            if *z == ZERO {
                continue;
            }
            let dl = (i / sl) % n;
            let dm = (i / sm) % n;
            let j = i + dm * sl + dl * sm - dl * sl - dm * sm;
            acc += z.conj() * self.amps[j];
        }
        Ok(acc.re)
    }

    /// `¼L(L+2) − Σ_{ℓ≠m}⟨P_{ℓ,m}⟩` with `P = ½(1 − SWAP)`; qubits only.
    pub fn total_spin_squared(&self) -> Result<f64> {
        if self.local_dim != 2 {
            return Err(Error::UnsupportedLocalDim(self.local_dim));
        }
        let l = self.num_sites;
        let mut singlet = 0.0;
        for a in 0..l {
            for b in a + 1..l {
                singlet += 0.5 * (1.0 - self.swap_expectation(a, b)?);
            }
        }
        Ok(0.25 * (l * (l + 2)) as f64 - 2.0 * singlet)
    }

    /// `(S^z, J²)`; `J²` exists for qubits only.
    pub fn conserved_charges(&self) -> Result<(f64, f64)> {
        Ok((self.total_sz(), self.total_spin_squared()?))
    }

    /// Writes `basis_index real imag` lines for every amplitude.
    pub fn write_amplitudes<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sites={} local_dim={}", self.num_sites, self.local_dim)?;
        for (i, z) in self.amps.iter().enumerate() {
            writeln!(w, "{i} {:?} {:?}", z.re, z.im)?;
        }
        Ok(())
    }

    /// Reads the format of [`write_amplitudes`](Self::write_amplitudes).
    /// Absent indices are zero; lines starting with `#` are skipped.
    pub fn read_amplitudes<R: BufRead>(num_sites: usize, local_dim: usize, r: R) -> Result<Self> {
        check_shape(num_sites, local_dim)?;
        let dim = local_dim.pow(num_sites as u32);
        let mut amps = vec![ZERO; dim];
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected `index real imag`, got `{t}`", lineno + 1));
            let mut it = t.split_whitespace();
            let idx: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let re: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let im: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            if idx >= dim {
                return Err(Error::Parse(format!("line {}: index {idx} beyond dimension {dim}", lineno + 1)));
            }
            amps[idx] = C64::new(re, im);
        }
        Self::from_amplitudes(num_sites, local_dim, amps)
    }
}

pub(crate) fn entropy_from_singular_values(sv: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for x in sv {
        let lam = x * x;
        if lam > 1e-14 {
            s -= lam * lam.ln();
        }
    }
    s
}

/// Flat index of a digit string, site 0 most significant.
pub fn basis_index(local_dim: usize, digits: &[usize]) -> Result<usize> {
    let mut idx = 0usize;
    for &d in digits {
        if d >= local_dim {
            return Err(Error::config("digits", format!("digit {d} invalid for local dimension {local_dim}")));
        }
        idx = idx * local_dim + d;
    }
    Ok(idx)
}

pub fn index_digits(local_dim: usize, num_sites: usize, mut index: usize) -> Vec<usize> {
    let mut d = vec![0; num_sites];
    for j in (0..num_sites).rev() {
        d[j] = index % local_dim;
        index /= local_dim;
    }
    d
}

pub(crate) fn charge2_of_index(local_dim: usize, num_sites: usize, mut index: usize) -> i64 {
    let mut q = 0;
    for _ in 0..num_sites {
        q += site_charge2(local_dim, index % local_dim);
        index /= local_dim;
    }
    q
}
