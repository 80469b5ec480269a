//! Matrix-free Lanczos for the lowest eigenpairs of a hermitian operator.

use nalgebra::{ComplexField, DMatrix};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Eigenpairs<T> {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, krylov_dim: 300, max_restarts: 40, seed: 0x5eed }
    }
}

fn dot<T: ComplexField<RealField = f64> + Copy>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.conjugate() * *y)
}

fn norm<T: ComplexField<RealField = f64> + Copy>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
}

fn orthogonalize<T: ComplexField<RealField = f64> + Copy>(w: &mut [T], basis: &[Vec<T>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * *y;
            }
        }
    }
}

fn random_vector<T: ComplexField<RealField = f64> + Copy>(dim: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..dim).map(|_| T::from_real(rng.random::<f64>() - 0.5)).collect()
}

/// Lowest `nev` eigenpairs of the hermitian map `matvec(x, y): y = A x`.
/// Explicitly restarted from the current Ritz vectors until every residual
/// `‖Av − θv‖` falls below `tol·max(1, |θ|)`.
pub fn lowest_eigenpairs<T, F>(dim: usize, nev: usize, mut matvec: F, opts: LanczosOptions) -> Result<Eigenpairs<T>>
where
    T: ComplexField<RealField = f64> + Copy,
    F: FnMut(&[T], &mut [T]),
{
    if nev == 0 || nev > dim {
        return Err(Error::Numerical(format!("cannot extract {nev} eigenpairs of a {dim}-dimensional operator")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let m_max = opts.krylov_dim.clamp(nev + 2, dim.max(nev + 2)).min(dim);
    let mut start: Vec<Vec<T>> = vec![random_vector(dim, &mut rng)];
    let mut w = vec![T::zero(); dim];
    for _restart in 0..=opts.max_restarts {
        // Krylov space spanned by the restart vectors followed by Lanczos steps
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m_max);
        for s in start.drain(..) {
            let mut v = s;
            orthogonalize(&mut v, &basis);
            let n = norm(&v);
            if n > 1e-10 {
                v.iter_mut().for_each(|x| *x = x.unscale(n));
                basis.push(v);
            }
        }
        if basis.is_empty() {
            basis.push(random_vector(dim, &mut rng));
            let n = norm(&basis[0]);
            basis[0].iter_mut().for_each(|x| *x = x.unscale(n));
        }
        let mut av: Vec<Vec<T>> = Vec::with_capacity(m_max);
        while av.len() < basis.len() || basis.len() < m_max {
            if av.len() == basis.len() {
                // extend the space with the residual of the newest vector
                let last = &av[av.len() - 1];
                let mut r = last.clone();
                orthogonalize(&mut r, &basis);
                let mut n = norm(&r);
                if n < 1e-12 {
                    r = random_vector(dim, &mut rng);
                    orthogonalize(&mut r, &basis);
                    n = norm(&r);
                }
                r.iter_mut().for_each(|x| *x = x.unscale(n));
                basis.push(r);
            }
            let k = av.len();
            matvec(&basis[k], &mut w);
            av.push(w.clone());
        }
        // Rayleigh-Ritz on the (reorthogonalized) Krylov space
        let m = basis.len();
        let mut h = DMatrix::<T>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let x = dot(&basis[i], &av[j]);
                h[(i, j)] = x;
                h[(j, i)] = x.conjugate();
            }
        }
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values = Vec::with_capacity(nev);
        let mut vectors = Vec::with_capacity(nev);
        let mut residuals = Vec::with_capacity(nev);
        for &c in order.iter().take(nev) {
            let theta = eig.eigenvalues[c];
            let y = eig.eigenvectors.column(c);
            let mut v = vec![T::zero(); dim];
            let mut r = vec![T::zero(); dim];
            for i in 0..m {
                let yi = y[i];
                for d in 0..dim {
                    v[d] += basis[i][d] * yi;
                    r[d] += av[i][d] * yi;
                }
            }
            for d in 0..dim {
                r[d] -= v[d].scale(theta);
            }
            values.push(theta);
            residuals.push(norm(&r));
            vectors.push(v);
        }
        let converged = values.iter().zip(&residuals).all(|(t, r)| *r <= opts.tol * t.abs().max(1.0));
        if converged || m == dim {
            return Ok(Eigenpairs { values, vectors, residuals });
        }
        // restart from the Ritz vectors plus a few extra ones to keep momentum
        start = vectors;
        for &c in order.iter().skip(nev).take(nev + 2) {
            let y = eig.eigenvectors.column(c);
            let mut v = vec![T::zero(); dim];
            for i in 0..m {
                for d in 0..dim {
                    v[d] += basis[i][d] * y[i];
                }
            }
            start.push(v);
        }
    }
    Err(Error::Numerical(format!("Lanczos did not converge after {} restarts", opts.max_restarts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn finds_lowest_of_a_path_laplacian() {
        let n = 400;
        let matvec = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 2.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let opts = LanczosOptions { tol: 1e-9, krylov_dim: 120, ..Default::default() };
        let res = lowest_eigenpairs(n, 2, matvec, opts).unwrap();
        for k in 0..2 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((res.values[k] - exact).abs() < 1e-10, "{} vs {exact}", res.values[k]);
        }
    }

    #[test]
    fn detects_degenerate_ground_space() {
        // spectrum 0, 0, 2, 3, ...
        let n = 50;
        let d: Vec<f64> = (0..n).map(|i| if i < 2 { 0.0 } else { i as f64 }).collect();
        let matvec = |x: &[C64], y: &mut [C64]| {
            for i in 0..n {
                y[i] = x[i] * d[i];
            }
        };
        let res = lowest_eigenpairs(n, 3, matvec, LanczosOptions::default()).unwrap();
        assert!(res.values[0].abs() < 1e-10 && res.values[1].abs() < 1e-10);
        assert!((res.values[2] - 2.0).abs() < 1e-10);
    }
}
