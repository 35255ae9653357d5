//! Matrix-free action of `H` on the full `8^N` space.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;

/// Largest full-space dimension handled: `8^8`.
pub const FULL_DIM_LIMIT: usize = 1 << 24;

const CHUNK: usize = 1 << 12;

/// All terms folded into one 64x64 operator per adjacent pair; single-site
/// terms join the pair on their right (the last site joins pair `N - 1`).
pub struct FullOperator {
    len: usize,
    dim: usize,
    /// `diag[p][local]`, pair `p + 1`.
    diag: Vec<[f64; 64]>,
    /// `rows[p][local]` = off-diagonal `(col, value)`.
    rows: Vec<Vec<Vec<(u8, C64)>>>,
    /// `8^(N - s)` for site `s`.
    weights: Vec<usize>,
}

impl FullOperator {
    pub fn new(h: &HamiltonianSpec) -> Result<Self> {
        let len = h.sites();
        if len > 8 {
            return Err(Error::DimensionTooLarge { dim: 1usize.checked_shl(3 * len as u32).unwrap_or(usize::MAX), limit: FULL_DIM_LIMIT });
        }
        let dim = 1usize << (3 * len);
        let mut dense = vec![[[C64::new(0.0, 0.0); 64]; 64]; len - 1];
        for t in &h.terms {
            let coeff = h.coefficient(t);
            for &(r, c, v) in &t.entries {
                let (r, c) = (r as usize, c as usize);
                if t.sites.len() == 2 {
                    dense[t.sites[0] - 1][r][c] += v * coeff;
                } else if t.sites[0] < len {
                    // site s joins pair s as the left digit
                    let p = t.sites[0] - 1;
                    for other in 0..8 {
                        dense[p][8 * r + other][8 * c + other] += v * coeff;
                    }
                } else {
                    let p = len - 2;
                    for other in 0..8 {
                        dense[p][8 * other + r][8 * other + c] += v * coeff;
                    }
                }
            }
        }
        let mut diag = vec![[0.0; 64]; len - 1];
        let mut rows = vec![vec![Vec::new(); 64]; len - 1];
        for p in 0..len - 1 {
            for r in 0..64 {
                diag[p][r] = dense[p][r][r].re;
                for c in 0..64 {
                    if c != r && dense[p][r][c] != C64::new(0.0, 0.0) {
                        rows[p][r].push((c as u8, dense[p][r][c]));
                    }
                }
            }
        }
        let weights = (0..=len).map(|s| if s == 0 { 0 } else { 1usize << (3 * (len - s)) }).collect();
        Ok(FullOperator { len, dim, diag, rows, weights })
    }

    pub fn sites(&self) -> usize {
        self.len
    }

    fn digits(&self, idx: usize) -> [usize; 8] {
        let mut d = [0; 8];
        for s in 1..=self.len {
            d[s - 1] = (idx / self.weights[s]) % 8;
        }
        d
    }

    /// Diagonal element `H[idx, idx]`.
    pub fn diagonal(&self, idx: usize) -> f64 {
        let d = self.digits(idx);
        (0..self.len - 1).map(|p| self.diag[p][8 * d[p] + d[p + 1]]).sum()
    }

    /// Nonzero entries of row `idx`, sorted by column.
    pub fn row(&self, idx: usize) -> Vec<(usize, C64)> {
        let d = self.digits(idx);
        let mut out = vec![(idx, C64::new(self.diagonal(idx), 0.0))];
        for p in 0..self.len - 1 {
            let local = 8 * d[p] + d[p + 1];
            for &(col, v) in &self.rows[p][local] {
                let (ca, cb) = (col as usize / 8, col as usize % 8);
                let j = idx + ca * self.weights[p + 1] + cb * self.weights[p + 2]
                    - d[p] * self.weights[p + 1]
                    - d[p + 1] * self.weights[p + 2];
                out.push((j, v));
            }
        }
        out.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, C64)> = Vec::with_capacity(out.len());
        for (j, v) in out {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|e| e.1 != C64::new(0.0, 0.0));
        merged
    }

    fn apply_range(&self, start: usize, x: &[C64], y: &mut [C64]) {
        for (k, out) in y.iter_mut().enumerate() {
            let idx = start + k;
            let d = self.digits(idx);
            let mut acc = C64::new(0.0, 0.0);
            let mut diag = 0.0;
            for p in 0..self.len - 1 {
                let local = 8 * d[p] + d[p + 1];
                diag += self.diag[p][local];
                let row = &self.rows[p][local];
                if row.is_empty() {
                    continue;
                }
                let base = idx - d[p] * self.weights[p + 1] - d[p + 1] * self.weights[p + 2];
                for &(col, v) in row {
                    let j = base + (col as usize / 8) * self.weights[p + 1] + (col as usize % 8) * self.weights[p + 2];
                    acc += v * x[j];
                }
            }
            *out = acc + x[idx] * diag;
        }
    }
}

impl LinearOperator for FullOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(k, chunk)| self.apply_range(k * CHUNK, x, chunk));
    }
}

/// Exact lowest eigenvalues of the full operator from its block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpectrum {
    /// Lowest eigenvalues found, with a representative basis index and the
    /// block dimension, ascending.
    pub lowest: Vec<(f64, usize, usize)>,
    /// Blocks in total (isolated basis states included).
    pub blocks: usize,
    /// Blocks diagonalized explicitly.
    pub solved: usize,
    /// Largest block diagonalized.
    pub largest_solved: usize,
    /// Smallest Gershgorin bound among blocks that were only bounded.
    pub bounded_min: f64,
}

impl BlockSpectrum {
    /// Certified lower bound on the whole spectrum.
    pub fn lower_bound(&self) -> f64 {
        self.lowest.first().map(|e| e.0).unwrap_or(f64::INFINITY).min(self.bounded_min)
    }
}

impl FullOperator {
    /// Connected blocks of the sparsity pattern, each sorted; isolated
    /// indices are omitted.
    pub fn coupled_blocks(&self) -> Vec<Vec<u32>> {
        let mut parent: Vec<u32> = (0..self.dim as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        let mut touched = vec![false; self.dim];
        for i in 0..self.dim {
            let d = self.digits(i);
            for p in 0..self.len - 1 {
                let local = 8 * d[p] + d[p + 1];
                if self.rows[p][local].is_empty() {
                    continue;
                }
                let base = i - d[p] * self.weights[p + 1] - d[p + 1] * self.weights[p + 2];
                for &(col, _) in &self.rows[p][local] {
                    let j = base + (col as usize / 8) * self.weights[p + 1] + (col as usize % 8) * self.weights[p + 2];
                    touched[i] = true;
                    touched[j] = true;
                    let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                    if a != b {
                        parent[a.max(b) as usize] = a.min(b);
                    }
                }
            }
        }
        let mut pairs: Vec<(u32, u32)> = (0..self.dim as u32)
            .filter(|&i| touched[i as usize])
            .map(|i| (find(&mut parent, i), i))
            .collect();
        pairs.sort_unstable();
        let mut out: Vec<Vec<u32>> = Vec::new();
        let mut current = u32::MAX;
        for (root, i) in pairs {
            if root != current {
                out.push(Vec::new());
                current = root;
            }
            out.last_mut().expect("block").push(i);
        }
        out
    }

    /// Lowest `k` eigenvalues over all blocks. Blocks whose Gershgorin lower
    /// bound is at least `threshold` are bounded instead of diagonalized.
    pub fn block_spectrum(&self, k: usize, threshold: f64) -> Result<BlockSpectrum> {
        use rayon::prelude::*;
        use std::collections::HashMap;
        use std::sync::Mutex;

        let blocks = self.coupled_blocks();
        let mut in_block = vec![false; self.dim];
        for b in &blocks {
            for &i in b {
                in_block[i as usize] = true;
            }
        }
        let mut lowest: Vec<(f64, usize, usize)> = Vec::new();
        let mut bounded_min = f64::INFINITY;
        let bounded = Mutex::new(Vec::new());
        let mut isolated = 0usize;
        for i in 0..self.dim {
            if !in_block[i] {
                isolated += 1;
                let d = self.diagonal(i);
                if d >= threshold {
                    bounded_min = bounded_min.min(d);
                } else {
                    lowest.push((d, i, 1));
                }
            }
        }
        // Local sparse form of every block that the Gershgorin bound does not
        // settle; identical blocks are diagonalized once.
        let pending: Vec<(usize, Vec<Vec<(usize, C64)>>)> = blocks
            .par_iter()
            .enumerate()
            .filter_map(|(bi, b)| {
                let pos: HashMap<u32, usize> = b.iter().enumerate().map(|(k, &i)| (i, k)).collect();
                let mut gersh = f64::INFINITY;
                let rows: Vec<Vec<(usize, C64)>> = b
                    .iter()
                    .map(|&i| {
                        let row = self.row(i as usize);
                        let off: f64 = row.iter().filter(|e| e.0 != i as usize).map(|e| e.1.norm()).sum();
                        gersh = gersh.min(self.diagonal(i as usize) - off);
                        row.into_iter().map(|(j, v)| (pos[&(j as u32)], v)).collect()
                    })
                    .collect();
                (gersh < threshold).then_some((bi, rows)).or_else(|| {
                    bounded.lock().expect("bound lock").push(gersh);
                    None
                })
            })
            .collect();
        bounded_min = bounded.into_inner().expect("bound lock").into_iter().fold(bounded_min, f64::min);
        let mut unique: HashMap<Vec<(u32, u32, u64, u64)>, usize> = HashMap::new();
        let mut jobs: Vec<&Vec<Vec<(usize, C64)>>> = Vec::new();
        let mut job_of = Vec::with_capacity(pending.len());
        for (_, rows) in &pending {
            let key: Vec<(u32, u32, u64, u64)> = rows
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r as u32, c as u32, v.re.to_bits(), v.im.to_bits())))
                .collect();
            let next = jobs.len();
            let id = *unique.entry(key).or_insert(next);
            if id == next {
                jobs.push(rows);
            }
            job_of.push(id);
        }
        let tol = 1e-10 * self.scale();
        let results: Vec<Result<Vec<f64>>> = jobs.par_iter().map(|rows| sparse_block_min(rows, k, tol)).collect();
        let results: Vec<Vec<f64>> = results.into_iter().collect::<Result<_>>()?;
        let (solved, mut largest_solved) = (pending.len(), 0usize);
        for ((bi, rows), id) in pending.iter().zip(job_of) {
            largest_solved = largest_solved.max(rows.len());
            let rep = blocks[*bi][0] as usize;
            lowest.extend(results[id].iter().map(|&v| (v, rep, rows.len())));
        }
        lowest.sort_by(|a, b| a.0.total_cmp(&b.0));
        lowest.truncate(k);
        Ok(BlockSpectrum { lowest, blocks: blocks.len() + isolated, solved, largest_solved, bounded_min })
    }

    /// Largest absolute diagonal or off-diagonal block entry, a scale for
    /// relative tolerances.
    pub fn scale(&self) -> f64 {
        let mut s: f64 = 1.0;
        for p in 0..self.len - 1 {
            for r in 0..64 {
                s = s.max(self.diag[p][r].abs());
                for &(_, v) in &self.rows[p][r] {
                    s = s.max(v.norm());
                }
            }
        }
        s
    }
}

/// Blocks up to this size are diagonalized densely; larger ones by Lanczos.
const DENSE_BLOCK: usize = 400;

/// Lowest `k` eigenvalues of a Hermitian block given by local sparse rows.
pub(crate) fn sparse_block_min(rows: &[Vec<(usize, C64)>], k: usize, tol: f64) -> Result<Vec<f64>> {
    use super::eigen::{lanczos, min_eigs_dense, LanczosOptions};
    if rows.len() <= DENSE_BLOCK {
        let mut m = nalgebra::DMatrix::<C64>::zeros(rows.len(), rows.len());
        for (r, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                m[(r, j)] += v;
            }
        }
        return Ok(min_eigs_dense(&m, k)?.values);
    }
    let opts = LanczosOptions { k, tol, max_iter: 20_000, max_basis: 200, ..Default::default() };
    let e = lanczos(&SparseBlock(rows), &opts)?;
    if !e.converged {
        let residual = e.residuals.iter().cloned().fold(0.0, f64::max);
        return Err(Error::NoConvergence { iterations: e.iterations, residual });
    }
    Ok(e.values)
}

struct SparseBlock<'a>(&'a [Vec<(usize, C64)>]);

impl LinearOperator for SparseBlock<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, row) in self.0.iter().enumerate() {
            y[r] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }
}

/// `y = H x` on the full space.
pub fn apply_full(h: &HamiltonianSpec, x: &[C64]) -> Result<Vec<C64>> {
    let op = FullOperator::new(h)?;
    if x.len() != op.dim {
        return Err(Error::ShapeMismatch(format!("vector has length {}, space has {}", x.len(), op.dim)));
    }
    let mut y = vec![C64::new(0.0, 0.0); op.dim];
    op.apply(x, &mut y);
    Ok(y)
}
