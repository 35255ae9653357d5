//! `H` restricted to the span of a set of configurations.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::local::{apply_term, compile, holder_ranks, CompiledTerm};
use super::LinearOperator;
use crate::chain::Configuration;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;

/// Largest restricted dimension accepted.
pub const RESTRICT_LIMIT: usize = 100_000;
/// Largest restricted dimension turned into a dense matrix.
pub const DENSE_LIMIT: usize = 6_000;

/// Basis `(configuration in canonical order) x (content bits, low site
/// first)`.
#[derive(Debug, Clone)]
pub struct RestrictedBasis {
    configs: Vec<Configuration>,
    offsets: Vec<usize>,
    index: HashMap<Configuration, usize>,
    dim: usize,
}

impl RestrictedBasis {
    pub fn new(set: &[Configuration]) -> Result<Self> {
        let mut configs = set.to_vec();
        configs.sort();
        configs.dedup();
        let mut offsets = Vec::with_capacity(configs.len());
        let mut index = HashMap::with_capacity(configs.len());
        let mut dim = 0usize;
        for (k, c) in configs.iter().enumerate() {
            offsets.push(dim);
            index.insert(c.clone(), k);
            dim = dim.checked_add(1usize << c.qubit_count()).unwrap_or(usize::MAX);
            if dim > RESTRICT_LIMIT {
                return Err(Error::DimensionTooLarge { dim, limit: RESTRICT_LIMIT });
            }
        }
        Ok(RestrictedBasis { configs, offsets, index, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    /// Offset of the content block of `c`.
    pub fn offset(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).map(|&k| self.offsets[k])
    }

    /// `(configuration, content)` of a basis index.
    pub fn label(&self, idx: usize) -> (&Configuration, usize) {
        let k = match self.offsets.binary_search(&idx) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        (&self.configs[k], idx - self.offsets[k])
    }
}

/// `P_S H P_S` as a sparse Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Restricted {
    pub basis: RestrictedBasis,
    /// Row-sorted `(row, col, value)`, duplicates merged.
    pub entries: Vec<(usize, usize, C64)>,
}

impl Restricted {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn dense(&self) -> Result<DMatrix<C64>> {
        let d = self.dim();
        if d > DENSE_LIMIT {
            return Err(Error::DimensionTooLarge { dim: d, limit: DENSE_LIMIT });
        }
        let mut m = DMatrix::zeros(d, d);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        Ok(m)
    }

    /// Connected blocks of the sparsity pattern.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(r, c, _) in &self.entries {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Dense sub-matrix on the given basis indices.
    pub fn sub_dense(&self, idx: &[usize]) -> DMatrix<C64> {
        let pos: HashMap<usize, usize> = idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for &(r, c, v) in &self.entries {
            if let (Some(&a), Some(&b)) = (pos.get(&r), pos.get(&c)) {
                m[(a, b)] += v;
            }
        }
        m
    }
}

impl LinearOperator for Restricted {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }
}

/// Compiled term list for repeated restrictions of one Hamiltonian.
pub struct Restrictor {
    n: usize,
    rounds: usize,
    terms: Vec<CompiledTerm>,
}

impl Restrictor {
    pub fn new(h: &HamiltonianSpec) -> Self {
        Restrictor { n: h.n, rounds: h.rounds, terms: compile(h) }
    }

    pub fn restrict(&self, set: &[Configuration]) -> Result<Restricted> {
        for c in set {
            if c.n() != self.n || c.rounds() != self.rounds {
                return Err(Error::ShapeMismatch(format!(
                    "configuration {c} does not fit n = {}, R = {}",
                    self.n, self.rounds
                )));
            }
        }
        let basis = RestrictedBasis::new(set)?;
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        for c in basis.configs() {
            let ranks = holder_ranks(c);
            let base = basis.offset(c).expect("own configuration");
            for u in 0..1usize << c.qubit_count() {
                let col = base + u;
                for t in &self.terms {
                    apply_term(t, c, &ranks, u, &mut |out_c, out_u, v| {
                        if let Some(off) = basis.offset(&out_c) {
                            entries.push((off + out_u, col, v));
                        }
                    });
                }
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != C64::new(0.0, 0.0));
        Ok(Restricted { basis, entries: merged })
    }
}

/// Restricts `h` to the span of `set`; transitions leaving the set are
/// dropped.
pub fn restrict(h: &HamiltonianSpec, set: &[Configuration]) -> Result<Restricted> {
    Restrictor::new(h).restrict(set)
}
