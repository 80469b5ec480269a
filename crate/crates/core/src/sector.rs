//! Fixed-charge subspaces of the chain Hilbert space and precompiled
//! local-operator kernels acting on them.
//!
//! Every operator used by the control protocols commutes with the local
//! charge of its support, so on a fixed total-charge subspace it acts
//! block-diagonally: the sector states that agree outside the support form a
//! group, and each group is a full block of local configurations sharing one
//! local charge. The group layout is computed once per support.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, C64, ZERO};
use crate::state::{charge2_of_index, entropy_from_singular_values, LocalOperator, QuditState};

const ABSENT: u32 = u32::MAX;

/// Basis states of fixed total charge `2·S^z` (or the whole space).
#[derive(Clone, Debug)]
pub struct Sector {
    num_sites: usize,
    local_dim: usize,
    charge2: Option<i64>,
    states: Vec<usize>,
    lookup: Vec<u32>,
}

impl Sector {
    /// Basis states with total charge `charge2`; `None` keeps every state.
    pub fn new(num_sites: usize, local_dim: usize, charge2: Option<i64>) -> Result<Self> {
        if !(2..=3).contains(&local_dim) {
            return Err(Error::UnsupportedLocalDim(local_dim));
        }
        let full = local_dim
            .checked_pow(num_sites as u32)
            .filter(|&d| d < ABSENT as usize)
            .ok_or_else(|| Error::config("L", format!("{local_dim}^{num_sites} states exceed the index range")))?;
        let mut states = Vec::new();
        let mut lookup = vec![ABSENT; full];
        for (i, slot) in lookup.iter_mut().enumerate() {
            if charge2.is_none_or(|q| charge2_of_index(local_dim, num_sites, i) == q) {
                *slot = states.len() as u32;
                states.push(i);
            }
        }
        if states.is_empty() {
            return Err(Error::config("charge", format!("no basis state has charge {charge2:?}")));
        }
        Ok(Sector { num_sites, local_dim, charge2, states, lookup })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn charge2(&self) -> Option<i64> {
        self.charge2
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Full-space basis index of each sector state, ascending.
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn index_of(&self, full_index: usize) -> Option<usize> {
        match self.lookup.get(full_index) {
            Some(&k) if k != ABSENT => Some(k as usize),
            _ => None,
        }
    }

    /// Restrict a dense state; weight outside the sector above 1e-12 is an error.
    pub fn compress(&self, state: &QuditState) -> Result<Vec<C64>> {
        if state.num_sites() != self.num_sites || state.local_dim() != self.local_dim {
            return Err(Error::DimensionMismatch("state does not match sector shape".into()));
        }
        let amps = state.amplitudes();
        let inside: Vec<C64> = self.states.iter().map(|&i| amps[i]).collect();
        let w_in: f64 = inside.iter().map(|z| z.norm_sqr()).sum();
        let leak = (1.0 - w_in).abs();
        if leak > 1e-12 {
            return Err(Error::SectorLeak(leak));
        }
        Ok(inside)
    }

    pub fn expand(&self, amps: &[C64]) -> Result<QuditState> {
        if amps.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("expected {} amplitudes, got {}", self.dim(), amps.len())));
        }
        let mut full = vec![ZERO; self.lookup.len()];
        for (&i, z) in self.states.iter().zip(amps) {
            full[i] = *z;
        }
        QuditState::from_amplitudes(self.num_sites, self.local_dim, full)
    }

    /// Group layout for operators supported on `support`.
    pub fn table(&self, support: &[usize]) -> Result<GroupTable> {
        let n = self.local_dim;
        let l = self.num_sites;
        for (i, &s) in support.iter().enumerate() {
            if s >= l {
                return Err(Error::SiteOutOfRange { site: s, len: l });
            }
            if support[..i].contains(&s) {
                return Err(Error::DuplicateSite(s));
            }
        }
        let k = support.len();
        let strides: Vec<usize> = support.iter().map(|&s| n.pow((l - 1 - s) as u32)).collect();
        let local_dim = n.pow(k as u32);
        let local_of = |full: usize| -> usize {
            strides.iter().fold(0, |acc, &st| acc * n + (full / st) % n)
        };
        let offset_of = |a: usize| -> usize {
            let mut a = a;
            let mut off = 0;
            for j in (0..k).rev() {
                off += (a % n) * strides[j];
                a /= n;
            }
            off
        };
        let local_charge = |a: usize| -> i64 {
            let mut a = a;
            let mut q = 0;
            for _ in 0..k {
                q += crate::state::site_charge2(n, a % n);
                a /= n;
            }
            q
        };
        // classes: local configurations grouped by local charge (or all together)
        let mut class_key: Vec<i64> = Vec::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of_config = vec![0usize; local_dim];
        let mut pos_in_class = vec![0usize; local_dim];
        for a in 0..local_dim {
            let key = if self.charge2.is_some() { local_charge(a) } else { 0 };
            let c = match class_key.iter().position(|&q| q == key) {
                Some(c) => c,
                None => {
                    class_key.push(key);
                    classes.push(Vec::new());
                    classes.len() - 1
                }
            };
            class_of_config[a] = c;
            pos_in_class[a] = classes[c].len();
            classes[c].push(a);
        }
        let mut group_of_rest: HashMap<usize, usize> = HashMap::new();
        let mut group_class: Vec<u8> = Vec::new();
        let mut group_slots: Vec<Vec<u32>> = Vec::new();
        for (si, &full) in self.states.iter().enumerate() {
            let a = local_of(full);
            let rest = full - offset_of(a);
            let c = class_of_config[a];
            let g = *group_of_rest.entry(rest).or_insert_with(|| {
                group_class.push(c as u8);
                group_slots.push(vec![ABSENT; classes[c].len()]);
                group_slots.len() - 1
            });
            group_slots[g][pos_in_class[a]] = si as u32;
        }
        let mut members = Vec::with_capacity(self.dim());
        let mut starts = Vec::with_capacity(group_slots.len() + 1);
        for slots in &group_slots {
            if slots.contains(&ABSENT) {
                return Err(Error::Numerical("incomplete block in sector group table".into()));
            }
            starts.push(members.len() as u32);
            members.extend_from_slice(slots);
        }
        starts.push(members.len() as u32);
        Ok(GroupTable { support: support.to_vec(), members, starts, group_class, classes })
    }

    /// Block form of `op` on this sector. Matrix elements coupling different
    /// local charges are rejected in a charge-restricted sector.
    pub fn compile(&self, op: &LocalOperator, table: &GroupTable) -> Result<CompiledOp> {
        if op.support() != table.support.as_slice() {
            return Err(Error::DimensionMismatch("operator support differs from table support".into()));
        }
        if op.local_dim() != self.local_dim {
            return Err(Error::DimensionMismatch("operator local dimension differs from sector".into()));
        }
        let m = op.matrix();
        if table.classes.len() > 1 {
            let mut leak = 0.0f64;
            for (c1, cls1) in table.classes.iter().enumerate() {
                for (c2, cls2) in table.classes.iter().enumerate() {
                    if c1 != c2 {
                        for &a in cls1 {
                            for &b in cls2 {
                                leak = leak.max(m[(a, b)].norm());
                            }
                        }
                    }
                }
            }
            if leak > 1e-12 {
                return Err(Error::SectorLeak(leak));
            }
        }
        let blocks = table
            .classes
            .iter()
            .map(|cls| CMatrix::from_fn(cls.len(), cls.len(), |i, j| m[(cls[i], cls[j])]))
            .collect();
        Ok(CompiledOp { blocks })
    }

    /// Precomputed blocks for the entanglement entropy of sites `[0, cut)`.
    pub fn entropy_table(&self, cut: usize) -> Result<EntropyTable> {
        if cut == 0 || cut >= self.num_sites {
            return Err(Error::CutOutOfRange { cut, len: self.num_sites });
        }
        let n = self.local_dim;
        let right_dim = n.pow((self.num_sites - cut) as u32);
        let mut block_of_key: HashMap<i64, usize> = HashMap::new();
        let mut rows: Vec<HashMap<usize, usize>> = Vec::new();
        let mut cols: Vec<HashMap<usize, usize>> = Vec::new();
        let mut entries = Vec::with_capacity(self.dim());
        for &full in &self.states {
            let left = full / right_dim;
            let right = full % right_dim;
            let key = if self.charge2.is_some() { charge2_of_index(n, cut, left) } else { 0 };
            let b = *block_of_key.entry(key).or_insert_with(|| {
                rows.push(HashMap::new());
                cols.push(HashMap::new());
                rows.len() - 1
            });
            let nr = rows[b].len();
            let r = *rows[b].entry(left).or_insert(nr);
            let nc = cols[b].len();
            let c = *cols[b].entry(right).or_insert(nc);
            entries.push((b as u32, r as u32, c as u32));
        }
        let shapes = rows.iter().zip(&cols).map(|(r, c)| (r.len(), c.len())).collect();
        Ok(EntropyTable { cut, shapes, entries })
    }

    /// `⟨SWAP_{ℓ,m}⟩` on a sector vector.
    pub fn swap_expectation(&self, amps: &[C64], l: usize, m: usize) -> f64 {
        let n = self.local_dim;
        let sl = n.pow((self.num_sites - 1 - l) as u32);
        let sm = n.pow((self.num_sites - 1 - m) as u32);
        let mut acc = ZERO;
        for (z, &i) in amps.iter().zip(&self.states) {
            if *z == ZERO {
                continue;
            }
            let dl = (i / sl) % n;
            let dm = (i / sm) % n;
            if dl == dm {
                acc += z.norm_sqr();
                continue;
            }
            let j = i + dm * sl + dl * sm - dl * sl - dm * sm;
            let k = self.lookup[j];
            if k != ABSENT {
                acc += z.conj() * amps[k as usize];
            }
        }
        acc.re
    }

    /// `¼L(L+2) − Σ_{ℓ≠m}⟨P_{ℓ,m}⟩` for qubits.
    pub fn total_spin_squared(&self, amps: &[C64]) -> Result<f64> {
        if self.local_dim != 2 {
            return Err(Error::UnsupportedLocalDim(self.local_dim));
        }
        let l = self.num_sites;
        let mut singlet = 0.0;
        for a in 0..l {
            for b in a + 1..l {
                singlet += 0.5 * (1.0 - self.swap_expectation(amps, a, b));
            }
        }
        Ok(0.25 * (l * (l + 2)) as f64 - 2.0 * singlet)
    }

    /// `⟨S^z_tot⟩` on a sector vector.
    pub fn total_sz(&self, amps: &[C64]) -> f64 {
        match self.charge2 {
            Some(q) => 0.5 * q as f64 * amps.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            None => {
                0.5 * amps
                    .iter()
                    .zip(&self.states)
                    .map(|(z, &i)| z.norm_sqr() * charge2_of_index(self.local_dim, self.num_sites, i) as f64)
                    .sum::<f64>()
            }
        }
    }
}

/// Sector states grouped by their configuration outside an operator support.
#[derive(Clone, Debug)]
pub struct GroupTable {
    support: Vec<usize>,
    members: Vec<u32>,
    starts: Vec<u32>,
    group_class: Vec<u8>,
    classes: Vec<Vec<usize>>,
}

impl GroupTable {
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    fn groups(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.starts
            .windows(2)
            .zip(&self.group_class)
            .map(|(w, &c)| (c as usize, &self.members[w[0] as usize..w[1] as usize]))
    }
}

/// Local operator in block form; apply it together with its [`GroupTable`].
#[derive(Clone, Debug)]
pub struct CompiledOp {
    blocks: Vec<CMatrix>,
}

impl CompiledOp {
    /// `ψ ← Oψ`.
    pub fn apply(&self, table: &GroupTable, amps: &mut [C64]) {
        let mut buf = [ZERO; 27];
        for (c, idx) in table.groups() {
            let m = &self.blocks[c];
            let d = idx.len();
            for (b, &i) in buf.iter_mut().zip(idx) {
                *b = amps[i as usize];
            }
            for (a, &i) in idx.iter().enumerate() {
                let mut acc = ZERO;
                for b in 0..d {
                    acc += m[(a, b)] * buf[b];
                }
                amps[i as usize] = acc;
            }
        }
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, table: &GroupTable, amps: &[C64]) -> C64 {
        let mut acc = ZERO;
        for (c, idx) in table.groups() {
            let m = &self.blocks[c];
            for (a, &i) in idx.iter().enumerate() {
                let mut row = ZERO;
                for (b, &j) in idx.iter().enumerate() {
                    row += m[(a, b)] * amps[j as usize];
                }
                acc += amps[i as usize].conj() * row;
            }
        }
        acc
    }

    /// `ψ ← Oψ/‖Oψ‖`, returning `‖Oψ‖`. If the norm is below `floor` the
    /// unnormalized `Oψ` is left in place.
    pub fn apply_normalized(&self, table: &GroupTable, amps: &mut [C64], floor: f64) -> f64 {
        let mut buf = [ZERO; 27];
        let mut n2 = 0.0;
        for (c, idx) in table.groups() {
            let m = &self.blocks[c];
            let d = idx.len();
            for (b, &i) in buf.iter_mut().zip(idx) {
                *b = amps[i as usize];
            }
            for (a, &i) in idx.iter().enumerate() {
                let mut acc = ZERO;
                for b in 0..d {
                    acc += m[(a, b)] * buf[b];
                }
                n2 += acc.norm_sqr();
                amps[i as usize] = acc;
            }
        }
        let n = n2.sqrt();
        if n >= floor {
            let inv = 1.0 / n;
            amps.iter_mut().for_each(|a| *a *= inv);
        }
        n
    }

    pub fn max_block_deviation(&self, other: &CompiledOp) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max)
    }
}

/// Left-charge blocks of the amplitude matrix for one bipartition.
#[derive(Clone, Debug)]
pub struct EntropyTable {
    cut: usize,
    shapes: Vec<(usize, usize)>,
    entries: Vec<(u32, u32, u32)>,
}

impl EntropyTable {
    pub fn cut(&self) -> usize {
        self.cut
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self, amps: &[C64]) -> f64 {
        let mut blocks: Vec<DMatrix<C64>> = self.shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect();
        for (z, &(b, r, c)) in amps.iter().zip(&self.entries) {
            blocks[b as usize][(r as usize, c as usize)] = *z;
        }
        let mut sv = Vec::new();
        for m in blocks {
            if m.iter().all(|z| *z == ZERO) {
                continue;
            }
            sv.extend(m.singular_values().iter().copied());
        }
        entropy_from_singular_values(sv.into_iter())
    }
}
