//! Smallest eigenvalues: dense (split into connected blocks) and a
//! thick-restart Lanczos with full reorthogonalization for matvec handles.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Eigenvalues with per-value residuals `||Hv - lv||`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigs {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Connected blocks of the nonzero pattern, each sorted; blocks ordered by
/// their smallest index.
pub fn blocks(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..n {
        for c in r + 1..n {
            if m[(r, c)] != zero() || m[(c, r)] != zero() {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// All eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn dense_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(k));
    }
    (values, vecs)
}

/// The `k` smallest eigenvalues of a dense Hermitian matrix, diagonalizing
/// each connected block separately.
pub fn min_eigs_dense(m: &DMatrix<C64>, k: usize) -> Result<Eigs> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for block in blocks(m) {
        let sub = DMatrix::from_fn(block.len(), block.len(), |r, c| m[(block[r], block[c])]);
        let (vals, vecs) = dense_eigh(&sub);
        for (j, &v) in vals.iter().enumerate() {
            let x = vecs.column(j);
            let res = (&sub * x - x * C64::new(v, 0.0)).norm();
            pairs.push((v, res));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    Ok(Eigs {
        values: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.1).collect(),
        iterations: 0,
        converged: true,
    })
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub k: usize,
    /// Residual target for every reported pair.
    pub tol: f64,
    /// Matvec budget.
    pub max_iter: usize,
    /// Largest number of stored basis vectors before a thick restart.
    pub max_basis: usize,
    pub seed: u64,
    /// Starting vector; a seeded random vector when `None`.
    pub start: Option<Vec<C64>>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { k: 1, tol: 1e-8, max_iter: 2000, max_basis: 60, seed: 0, start: None }
    }
}

const DOT_CHUNK: usize = 1 << 14;

/// `<a, b>` summed in fixed-size chunks, in order.
fn dot(a: &[C64], b: &[C64]) -> C64 {
    use rayon::prelude::*;
    let parts: Vec<C64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
        .collect();
    parts.into_iter().sum()
}

fn norm(a: &[C64]) -> f64 {
    dot(a, a).re.sqrt()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    use rayon::prelude::*;
    y.par_iter_mut().zip(x.par_iter()).for_each(|(b, a)| *b += alpha * a);
}

fn scale(alpha: f64, x: &mut [C64]) {
    use rayon::prelude::*;
    x.par_iter_mut().for_each(|v| *v *= alpha);
}

/// Seeded vector with independent uniform real and imaginary parts.
pub fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

/// Thick-restart Lanczos. Every new vector is orthogonalized twice against
/// the whole stored basis; on restart the `k` best Ritz vectors (plus a few
/// spare) and the residual direction are kept.
pub fn lanczos(op: &dyn LinearOperator, opts: &LanczosOptions) -> Result<Eigs> {
    let dim = op.dim();
    let k = opts.k.min(dim).max(1);
    if (dim <= opts.max_basis.max(k + 2) || 2 * k >= dim) && opts.start.is_none() && dim <= 4096 {
        return dense_from_operator(op, k);
    }
    let keep = (k + 2).min(opts.max_basis.saturating_sub(2)).max(k);
    let m = opts.max_basis.max(keep + 2).min(dim);

    let mut v0 = match &opts.start {
        Some(s) if s.len() == dim => s.clone(),
        Some(s) => return Err(Error::ShapeMismatch(format!("start vector has length {}, operator {dim}", s.len()))),
        None => random_vector(dim, opts.seed),
    };
    let n0 = norm(&v0);
    if n0 == 0.0 {
        return Err(Error::InvalidArgument("zero start vector".into()));
    }
    scale(1.0 / n0, &mut v0);

    let mut basis: Vec<Vec<C64>> = vec![v0];
    // projected matrix G = V^H A V, grown column by column
    let mut g: Vec<Vec<C64>> = Vec::new();
    let mut kept = 0usize; // leading basis vectors that are Ritz vectors
    let mut ritz_vals: Vec<f64> = Vec::new();
    let mut matvecs = 0usize;
    let mut w = vec![zero(); dim];

    loop {
        // extend from the first vector whose column is missing
        let mut beta_last = 0.0;
        let mut exhausted = false;
        let mut j = g.len().max(kept);
        while j < m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let mut col = vec![zero(); j + 2];
            for _pass in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let h = dot(b, &w);
                    col[i] += h;
                    axpy(-h, b, &mut w);
                }
            }
            let beta = norm(&w);
            col[j + 1] = C64::new(beta, 0.0);
            g.push(col);
            beta_last = beta;
            if beta <= 1e-14 * (1.0 + col_scale(&g)) || basis.len() == dim {
                exhausted = true;
                break;
            }
            let mut next = w.clone();
            scale(1.0 / beta, &mut next);
            basis.push(next);
            j += 1;
            if matvecs >= opts.max_iter {
                break;
            }
        }
        let size = g.len();
        let proj = DMatrix::from_fn(size, size, |r, c| {
            if r < kept && c < kept {
                if r == c {
                    C64::new(ritz_vals[r], 0.0)
                } else {
                    zero()
                }
            } else if r <= c {
                g[c].get(r).copied().unwrap_or_default()
            } else {
                g[r].get(c).copied().unwrap_or_default().conj()
            }
        });
        let (theta, s) = dense_eigh(&proj);
        // residual estimates |beta * s_last|
        let est: Vec<f64> = (0..k.min(size)).map(|i| (s[(size - 1, i)] * beta_last).norm()).collect();
        let done = exhausted || est.iter().all(|&e| e <= opts.tol);
        if done || matvecs >= opts.max_iter {
            // explicit residuals
            let count = k.min(size);
            let mut values = Vec::with_capacity(count);
            let mut residuals = Vec::with_capacity(count);
            for i in 0..count {
                let x = combine(&basis[..size], s.column(i).as_slice());
                op.apply(&x, &mut w);
                axpy(C64::new(-theta[i], 0.0), &x, &mut w);
                values.push(theta[i]);
                residuals.push(norm(&w));
            }
            let converged = residuals.iter().all(|&r| r <= opts.tol);
            return Ok(Eigs { values, residuals, iterations: matvecs, converged });
        }
        // thick restart: keep Ritz vectors, then the residual direction
        let keep_now = keep.min(size - 1);
        let mut new_basis: Vec<Vec<C64>> = (0..keep_now).map(|i| combine(&basis[..size], s.column(i).as_slice())).collect();
        let resid = basis.pop().expect("residual direction");
        let mut new_g: Vec<Vec<C64>> = Vec::new();
        for i in 0..keep_now {
            let mut col = vec![zero(); i + 1];
            col[i] = C64::new(theta[i], 0.0);
            new_g.push(col);
        }
        // couplings between kept Ritz vectors and the residual direction
        // enter through the residual's column, computed on the next matvec
        new_basis.push(resid);
        basis = new_basis;
        g = new_g;
        kept = keep_now;
        ritz_vals = theta[..keep_now].to_vec();
    }
}

fn col_scale(g: &[Vec<C64>]) -> f64 {
    g.iter().flat_map(|c| c.iter()).map(|v| v.norm()).fold(0.0, f64::max)
}

fn combine(basis: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![zero(); basis[0].len()];
    for (b, &c) in basis.iter().zip(coeffs) {
        axpy(c, b, &mut out);
    }
    let nrm = norm(&out);
    scale(1.0 / nrm, &mut out);
    out
}

fn dense_from_operator(op: &dyn LinearOperator, k: usize) -> Result<Eigs> {
    let dim = op.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![zero(); dim];
    let mut y = vec![zero(); dim];
    for c in 0..dim {
        e.iter_mut().for_each(|v| *v = zero());
        e[c] = C64::new(1.0, 0.0);
        op.apply(&e, &mut y);
        for r in 0..dim {
            m[(r, c)] = y[r];
        }
    }
    min_eigs_dense(&m, k)
}

/// Dense matrix wrapped as an operator.
pub struct DenseOperator<'a>(pub &'a DMatrix<C64>);

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.0.nrows();
        for (r, out) in y.iter_mut().enumerate().take(n) {
            *out = (0..n).map(|c| self.0[(r, c)] * x[c]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let v = random_vector(n * n, seed);
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn identity_spectrum() {
        let m = DMatrix::<C64>::identity(5, 5);
        let e = min_eigs_dense(&m, 2).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn block_split_matches_whole() {
        let mut m = DMatrix::<C64>::zeros(6, 6);
        let a = random_hermitian(3, 1);
        let b = random_hermitian(3, 2);
        for r in 0..3 {
            for c in 0..3 {
                m[(2 * r, 2 * c)] = a[(r, c)];
                m[(2 * r + 1, 2 * c + 1)] = b[(r, c)];
            }
        }
        assert_eq!(blocks(&m).len(), 2);
        let split = min_eigs_dense(&m, 6).unwrap();
        let (whole, _) = dense_eigh(&m);
        for (x, y) in split.values.iter().zip(&whole) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let m = random_hermitian(300, 7);
        let opts = LanczosOptions { k: 3, max_basis: 40, max_iter: 5000, ..Default::default() };
        let l = lanczos(&DenseOperator(&m), &opts).unwrap();
        let d = min_eigs_dense(&m, 3).unwrap();
        assert!(l.converged, "{l:?}");
        for (x, y) in l.values.iter().zip(&d.values) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert!(l.residuals.iter().all(|&r| r <= 1e-8));
    }
}
