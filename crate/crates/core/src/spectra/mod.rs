//! States, expectation values, full-space and restricted operators,
//! eigensolvers and the tridiagonal walk matrices.
//!
//! Full-space basis index: `sum_s digit(s) * 8^(N - s)`, site 1 most
//! significant, digits in [`LocalBasis`] order. Restricted content index:
//! bit `k` is the content of the `k`-th qubit-holding site from the left.

mod eigen;
mod full;
mod local;
mod restrict;

pub use eigen::{
    blocks, dense_eigh, lanczos, min_eigs_dense, random_vector, DenseOperator, Eigs, LanczosOptions,
};
pub use full::{apply_full, BlockSpectrum, FullOperator, FULL_DIM_LIMIT};
pub use restrict::{restrict, Restricted, RestrictedBasis, Restrictor, DENSE_LIMIT, RESTRICT_LIMIT};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::chain::{Configuration, RuleSet};
use crate::circuit::{apply_two_qubit, gate_at_location, LayeredCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSpec, LocalBasis};
use local::{apply_term, compile, holder_ranks};

/// Hermitian operator given by its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Amplitudes on the full `8^N` space.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub n: usize,
    pub rounds: usize,
    pub amps: Vec<C64>,
}

impl FullState {
    pub fn zeros(n: usize, rounds: usize) -> Result<Self> {
        let len = 2 * n * rounds;
        if len > 8 {
            return Err(Error::DimensionTooLarge { dim: usize::MAX, limit: FULL_DIM_LIMIT });
        }
        Ok(FullState { n, rounds, amps: vec![C64::new(0.0, 0.0); 1 << (3 * len)] })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Full-space index of basis state `(c, u)`.
pub fn full_index(c: &Configuration, u: usize) -> usize {
    let mut rank = 0;
    let mut idx = 0usize;
    for s in 1..=c.len() {
        let sym = c.get(s);
        let bit = if sym.holds_qubit() {
            rank += 1;
            (u >> (rank - 1)) & 1
        } else {
            0
        };
        idx = idx * 8 + LocalBasis::index(sym, bit);
    }
    idx
}

/// Amplitudes per configuration, each a `2^q` content vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RestrictedState {
    pub blocks: BTreeMap<Configuration, Vec<C64>>,
}

impl RestrictedState {
    pub fn norm(&self) -> f64 {
        self.blocks.values().flat_map(|v| v.iter()).map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &RestrictedState) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (c, v) in &self.blocks {
            if let Some(w) = other.blocks.get(c) {
                acc += v.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
        }
        acc
    }

    /// Adds `amp` to basis state `(c, u)`.
    pub fn add(&mut self, c: &Configuration, u: usize, amp: C64) {
        let q = c.qubit_count();
        let block = self.blocks.entry(c.clone()).or_insert_with(|| vec![C64::new(0.0, 0.0); 1 << q]);
        block[u] += amp;
    }

    /// Embeds into the full space.
    pub fn to_full(&self, n: usize, rounds: usize) -> Result<FullState> {
        let mut out = FullState::zeros(n, rounds)?;
        for (c, v) in &self.blocks {
            for (u, a) in v.iter().enumerate() {
                out.amps[full_index(c, u)] += a;
            }
        }
        Ok(out)
    }

    /// Vector in the basis order of `basis`; amplitude outside it is dropped.
    pub fn to_vector(&self, basis: &RestrictedBasis) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); basis.dim()];
        for (c, v) in &self.blocks {
            if let Some(off) = basis.offset(c) {
                out[off..off + v.len()].copy_from_slice(v);
            }
        }
        out
    }
}

/// Applies every term of `h` to `s` without dropping anything.
pub fn apply_restricted(h: &HamiltonianSpec, s: &RestrictedState) -> RestrictedState {
    let terms = compile(h);
    let mut out = RestrictedState::default();
    for (c, v) in &s.blocks {
        let ranks = holder_ranks(c);
        for (u, &a) in v.iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for t in &terms {
                apply_term(t, c, &ranks, u, &mut |oc, ou, val| out.add(&oc, ou, val * a));
            }
        }
    }
    out
}

/// `<s|H|s>`; components of `H|s>` outside the support of `s` are
/// orthogonal to it and contribute nothing.
pub fn expectation(h: &HamiltonianSpec, s: &RestrictedState) -> Result<f64> {
    for c in s.blocks.keys() {
        if c.n() != h.n || c.rounds() != h.rounds {
            return Err(Error::ShapeMismatch(format!("state on {c} does not fit n = {}, R = {}", h.n, h.rounds)));
        }
    }
    let hs = apply_restricted(h, s);
    Ok(s.inner(&hs).re)
}

/// `<v|H|v>` on the full space.
pub fn expectation_full(op: &FullOperator, v: &FullState) -> f64 {
    let mut y = vec![C64::new(0.0, 0.0); v.amps.len()];
    op.apply(&v.amps, &mut y);
    v.amps.iter().zip(&y).map(|(a, b)| a.conj() * b).sum::<C64>().re
}

/// Converts an `n`-qubit circuit index (qubit 1 most significant) to the
/// content index (qubit 1 lowest bit).
pub fn circuit_to_content(idx: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, j| acc | (((idx >> (n - 1 - j)) & 1) << j))
}

/// Cumulative unitaries `U_t ... U_1` (in the content ordering) for every
/// legal step, together with the legal configurations.
pub fn legal_unitaries(circuit: &LayeredCircuit) -> Result<Vec<(Configuration, DMatrix<C64>)>> {
    let (n, rounds) = (circuit.n(), circuit.rounds());
    let trace = RuleSet::standard().legal_trace(n, rounds)?;
    let dim = 1usize << n;
    let mut current = DMatrix::<C64>::identity(dim, dim);
    let mut out = Vec::with_capacity(trace.len());
    for (c, rule) in trace {
        let next = match rule {
            Some(inst) if inst.rule.family() == 1 => {
                let gate = gate_at_location(circuit, inst.position)?;
                let rank = c.qubit_sites().iter().filter(|&&s| s < inst.position).count() + 1;
                if rank != gate.target {
                    return Err(Error::Internal(format!(
                        "gate at pair {} meets qubit {rank}, expected {}",
                        inst.position, gate.target
                    )));
                }
                let mut m = current.clone();
                for col in 0..dim {
                    // work in circuit order, then map back
                    let mut v = vec![C64::new(0.0, 0.0); dim];
                    for idx in 0..dim {
                        v[idx] = m[(circuit_to_content(idx, n), col)];
                    }
                    apply_two_qubit(&mut v, n, rank, rank + 1, &gate.matrix());
                    for idx in 0..dim {
                        m[(circuit_to_content(idx, n), col)] = v[idx];
                    }
                }
                Some(m)
            }
            _ => None,
        };
        out.push((c, current.clone()));
        if let Some(m) = next {
            current = m;
        }
    }
    Ok(out)
}

/// Uniform superposition over the legal sequence; the content of `C_t` is
/// the gates fired so far applied to `|0^(n-m)> (x) |witness>`.
pub fn history_state(circuit: &LayeredCircuit, witness: &[C64]) -> Result<RestrictedState> {
    let (n, m) = (circuit.n(), circuit.m());
    if witness.len() != 1 << m {
        return Err(Error::ShapeMismatch(format!("witness has length {}, expected 2^{m}", witness.len())));
    }
    let mut input = vec![C64::new(0.0, 0.0); 1 << n];
    for (w, &a) in witness.iter().enumerate() {
        input[circuit_to_content(w, n)] = a;
    }
    let steps = legal_unitaries(circuit)?;
    let weight = 1.0 / (steps.len() as f64).sqrt();
    let mut out = RestrictedState::default();
    for (c, u) in steps {
        let content = &u * nalgebra::DVector::from_vec(input.clone());
        out.blocks.insert(c, content.iter().map(|a| a * weight).collect());
    }
    Ok(out)
}

/// Tridiagonal walk matrix of size `L + 1`: diagonal `(f, 1, ..., 1, g)`,
/// off-diagonal `-1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkMatrix {
    pub f: f64,
    pub g: f64,
    pub l: usize,
}

pub fn walk_matrix(f: f64, g: f64, l: usize) -> Result<WalkMatrix> {
    if l == 0 {
        return Err(Error::InvalidArgument("walk matrix needs L >= 1".into()));
    }
    Ok(WalkMatrix { f, g, l })
}

impl WalkMatrix {
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.l + 1;
        DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                if r == 0 {
                    self.f
                } else if r == self.l {
                    self.g
                } else {
                    1.0
                }
            } else if r.abs_diff(c) == 1 {
                -0.5
            } else {
                0.0
            }
        })
    }

    pub fn dense_complex(&self) -> DMatrix<C64> {
        self.dense().map(|v| C64::new(v, 0.0))
    }

    /// Numerical eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(self.dense()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Closed-form spectrum for `(f, g)` in `{(1/2, 1/2), (1, 1), (1, 1/2)}`,
/// ascending.
pub fn walk_eigs_analytic(f: f64, g: f64, l: usize) -> Result<Vec<f64>> {
    use std::f64::consts::PI;
    let lf = l as f64;
    let mut v: Vec<f64> = match (f, g) {
        (a, b) if a == 0.5 && b == 0.5 => (0..=l).map(|m| 1.0 - (m as f64 * PI / (lf + 1.0)).cos()).collect(),
        (a, b) if a == 1.0 && b == 1.0 => (0..=l).map(|m| 1.0 - ((m as f64 + 1.0) * PI / (lf + 2.0)).cos()).collect(),
        (a, b) if a == 1.0 && b == 0.5 => {
            (0..=l).map(|m| 1.0 - ((2.0 * m as f64 + 1.0) * PI / (2.0 * lf + 3.0)).cos()).collect()
        }
        _ => return Err(Error::InvalidArgument(format!("no closed form for (f, g) = ({f}, {g})"))),
    };
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `W^dag H W` for `H` restricted to the legal set, with `W` the cumulative
/// gate unitaries. The result is ordered content-major, time-minor, so that
/// it equals `I (x) walk` when the rotation succeeds.
pub fn rotate_out_gates(hprop_legal: &Restricted, circuit: &LayeredCircuit) -> Result<DMatrix<C64>> {
    let steps = legal_unitaries(circuit)?;
    let n = circuit.n();
    let q = 1usize << n;
    let kk = steps.len();
    if hprop_legal.dim() != kk * q || hprop_legal.basis.configs().len() != kk {
        return Err(Error::ShapeMismatch(format!(
            "restricted matrix has dimension {}, legal space has {}",
            hprop_legal.dim(),
            kk * q
        )));
    }
    let h = hprop_legal.dense()?;
    // W maps (u, t) in content-major order into the restricted basis
    let mut w = DMatrix::<C64>::zeros(kk * q, kk * q);
    for (t, (c, u)) in steps.iter().enumerate() {
        let off = hprop_legal
            .basis
            .offset(c)
            .ok_or_else(|| Error::ShapeMismatch(format!("legal configuration {c} missing from the restriction")))?;
        for a in 0..q {
            for b in 0..q {
                w[(off + a, b * kk + t)] = u[(a, b)];
            }
        }
    }
    Ok(w.adjoint() * h * w)
}

/// Smallest eigenvalues of a restricted operator, solved block by block
/// (dense for small blocks, Lanczos otherwise). `opts.tol` is relative to the
/// largest entry.
pub fn min_eigs_restricted(h: &Restricted, opts: &LanczosOptions) -> Result<Eigs> {
    use rayon::prelude::*;
    let blocks = h.blocks();
    let scale = h.entries.iter().map(|e| e.2.norm()).fold(1.0, f64::max);
    let mut local = vec![(0usize, 0usize); h.dim()];
    for (b, idx) in blocks.iter().enumerate() {
        for (k, &i) in idx.iter().enumerate() {
            local[i] = (b, k);
        }
    }
    let mut rows: Vec<Vec<Vec<(usize, C64)>>> = blocks.iter().map(|b| vec![Vec::new(); b.len()]).collect();
    for &(r, c, v) in &h.entries {
        let (b, lr) = local[r];
        rows[b][lr].push((local[c].1, v));
    }
    let found: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| full::sparse_block_min(r, opts.k, opts.tol * scale))
        .collect::<Result<_>>()?;
    let mut values: Vec<f64> = found.into_iter().flatten().collect();
    values.sort_by(f64::total_cmp);
    values.truncate(opts.k);
    Ok(Eigs { residuals: vec![0.0; values.len()], values, iterations: 0, converged: true })
}

/// Stable tag of the basis convention written into vector exports.
pub fn basis_tag() -> String {
    use sha2::{Digest, Sha256};
    let text = format!("site1-msb;{}", LocalBasis::LABELS.join(","));
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Text export: a header line, then `index re im` for nonzero amplitudes.
pub fn export_vector(n: usize, rounds: usize, amps: &[C64]) -> String {
    let mut out = format!("# n={n} R={rounds} basis={}\n", basis_tag());
    for (i, a) in amps.iter().enumerate() {
        if *a != C64::new(0.0, 0.0) {
            let _ = writeln!(out, "{i} {:.17e} {:.17e}", a.re, a.im);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_small_cases() {
        let w = walk_matrix(0.5, 0.5, 1).unwrap().dense();
        assert_eq!(w, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let e = walk_matrix(0.5, 0.5, 3).unwrap().eigenvalues();
        let c = (std::f64::consts::PI / 4.0).cos();
        for (x, y) in e.iter().zip([0.0, 1.0 - c, 1.0, 1.0 + c]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_matches_numeric() {
        for (f, g) in [(0.5, 0.5), (1.0, 1.0), (1.0, 0.5)] {
            for l in 1..20 {
                let a = walk_eigs_analytic(f, g, l).unwrap();
                let b = walk_matrix(f, g, l).unwrap().eigenvalues();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-10, "({f},{g},{l})");
                }
            }
        }
        assert!(walk_eigs_analytic(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn content_index_reverses_bits() {
        assert_eq!(circuit_to_content(0b100, 3), 0b001);
        assert_eq!(circuit_to_content(0b110, 3), 0b011);
    }
}
