//! The four Hamiltonian pieces as explicit lists of weighted 1- and 2-site
//! terms.
//!
//! Site basis (frozen): `[INSI, PUSHER, BLANK, DEAD, QUBIT0, QUBIT1, GATE0,
//! GATE1]` = indices `0..8`. A two-site block on `(a, a+1)` uses the local
//! index `8 * idx(a) + idx(a+1)`, row-major.

mod build;
mod export;

pub use build::{
    build_h_in, build_h_out, build_h_pen, build_h_pen_with, build_h_prop, census, choose_couplings, norm_bound,
    TermCensus,
};
pub use export::{export_coo, export_terms, parse_terms};

use num_complex::Complex64 as C64;

use crate::chain::{step_count, LocationType, Symbol};
use crate::circuit::LayeredCircuit;
use crate::error::{Error, Result};

/// The frozen single-site basis.
pub struct LocalBasis;

impl LocalBasis {
    pub const DIM: usize = 8;
    pub const LABELS: [&'static str; 8] = ["INSI", "PUSHER", "BLANK", "DEAD", "QUBIT0", "QUBIT1", "GATE0", "GATE1"];

    /// Basis index of a symbol with the given content bit (ignored for
    /// symbols that carry no qubit).
    pub fn index(s: Symbol, bit: usize) -> usize {
        match s {
            Symbol::Insi => 0,
            Symbol::Pusher => 1,
            Symbol::Blank => 2,
            Symbol::Dead => 3,
            Symbol::Qubit => 4 + bit,
            Symbol::Gate => 6 + bit,
        }
    }

    /// Inverse of [`LocalBasis::index`].
    pub fn decode(idx: usize) -> (Symbol, usize) {
        match idx {
            0 => (Symbol::Insi, 0),
            1 => (Symbol::Pusher, 0),
            2 => (Symbol::Blank, 0),
            3 => (Symbol::Dead, 0),
            4 | 5 => (Symbol::Qubit, idx - 4),
            6 | 7 => (Symbol::Gate, idx - 6),
            _ => panic!("local basis index {idx} out of range"),
        }
    }

    /// Indices spanned by a symbol (two for qubit holders).
    pub fn span(s: Symbol) -> &'static [usize] {
        match s {
            Symbol::Insi => &[0],
            Symbol::Pusher => &[1],
            Symbol::Blank => &[2],
            Symbol::Dead => &[3],
            Symbol::Qubit => &[4, 5],
            Symbol::Gate => &[6, 7],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    In,
    Prop,
    Pen,
    Out,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::In => "in",
            Family::Prop => "prop",
            Family::Pen => "pen",
            Family::Out => "out",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        [Family::In, Family::Prop, Family::Pen, Family::Out].into_iter().find(|f| f.name() == s)
    }
}

/// What a propagation term block does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropPart {
    Projector,
    Transition,
}

/// A weighted 1- or 2-site block.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub family: Family,
    /// Propagation rule family 1..=6.
    pub rule: Option<u8>,
    pub part: Option<PropPart>,
    /// Location type of the pair the term is attached to (the transition
    /// pair for propagation terms, the penalized pair for penalty terms).
    pub location: Option<LocationType>,
    /// Pair (or site) the term is attached to.
    pub anchor: usize,
    /// One site, or two adjacent sites in ascending order (1-based).
    pub sites: Vec<usize>,
    pub weight: f64,
    /// Sparse matrix entries `(row, col, value)` in local basis order.
    pub entries: Vec<(u8, u8, C64)>,
}

impl LocalTerm {
    pub fn dim(&self) -> usize {
        if self.sites.len() == 1 {
            8
        } else {
            64
        }
    }

    /// Dense row-major block.
    pub fn dense(&self) -> Vec<C64> {
        let d = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for &(r, c, v) in &self.entries {
            m[r as usize * d + c as usize] += v;
        }
        m
    }

    /// Largest entry of `|M - M^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let m = self.dense();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((m[r * d + c] - m[c * d + r].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry of `|M^2 - M|`.
    pub fn projector_error(&self) -> f64 {
        let d = self.dim();
        let m = self.dense();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += m[r * d + k] * m[k * d + c];
                }
                worst = worst.max((acc - m[r * d + c]).norm());
            }
        }
        worst
    }

    /// Maximum absolute row sum: an upper bound on the spectral norm of a
    /// Hermitian block.
    pub fn norm_bound(&self) -> f64 {
        let d = self.dim();
        let mut rows = vec![0.0; d];
        for &(r, _, v) in &self.entries {
            rows[r as usize] += v.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// Coupling constants; `H = j_in H_in + j_prop H_prop + j_pen H_pen + H_out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub j_in: f64,
    pub j_prop: f64,
    pub j_pen: f64,
}

impl Couplings {
    pub fn unit() -> Self {
        Couplings { j_in: 1.0, j_prop: 1.0, j_pen: 1.0 }
    }

    pub fn for_family(&self, f: Family) -> f64 {
        match f {
            Family::In => self.j_in,
            Family::Prop => self.j_prop,
            Family::Pen => self.j_pen,
            Family::Out => 1.0,
        }
    }
}

/// The four pieces of the Hamiltonian for one circuit.
#[derive(Debug, Clone)]
pub struct Pieces {
    pub h_in: Vec<LocalTerm>,
    pub h_prop: Vec<LocalTerm>,
    pub h_pen: Vec<LocalTerm>,
    pub h_out: Vec<LocalTerm>,
}

impl Pieces {
    pub fn build(circuit: &LayeredCircuit) -> Result<Self> {
        let (n, rounds) = (circuit.n(), circuit.rounds());
        Ok(Pieces {
            h_in: build_h_in(n, circuit.m(), rounds)?,
            h_prop: build_h_prop(circuit)?,
            h_pen: build_h_pen(n, rounds)?,
            h_out: build_h_out(n, rounds)?,
        })
    }
}

/// Weighted term list with couplings.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub rounds: usize,
    pub k: usize,
    pub couplings: Couplings,
    /// Terms in canonical order: family (in, prop, pen, out), then the order
    /// each builder emits.
    pub terms: Vec<LocalTerm>,
}

impl HamiltonianSpec {
    pub fn sites(&self) -> usize {
        2 * self.n * self.rounds
    }

    /// Effective coefficient of a term: coupling times weight.
    pub fn coefficient(&self, t: &LocalTerm) -> f64 {
        self.couplings.for_family(t.family) * t.weight
    }

    /// Copy keeping only the listed families, with the same couplings.
    pub fn only(&self, families: &[Family]) -> HamiltonianSpec {
        HamiltonianSpec {
            terms: self.terms.iter().filter(|t| families.contains(&t.family)).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn with_couplings(&self, couplings: Couplings) -> HamiltonianSpec {
        HamiltonianSpec { couplings, ..self.clone() }
    }

    /// Rigorous bound on `||H||` (sum of |coefficient| times block norm bounds).
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| self.coefficient(t).abs() * t.norm_bound()).sum()
    }
}

/// Concatenates the pieces in canonical order.
pub fn assemble(pieces: &Pieces, n: usize, rounds: usize, couplings: Couplings) -> Result<HamiltonianSpec> {
    let len = 2 * n * rounds;
    let mut terms = Vec::new();
    for part in [&pieces.h_in, &pieces.h_prop, &pieces.h_pen, &pieces.h_out] {
        for t in part.iter() {
            if t.sites.iter().any(|&s| s == 0 || s > len) {
                return Err(Error::ShapeMismatch(format!("term on sites {:?} outside a chain of {len}", t.sites)));
            }
            terms.push(t.clone());
        }
    }
    Ok(HamiltonianSpec { n, rounds, k: step_count(n, rounds), couplings, terms })
}

/// Builds every piece for `circuit` and assembles them with `couplings`, or
/// with [`choose_couplings`] when `None`.
pub fn hamiltonian_for(circuit: &LayeredCircuit, couplings: Option<Couplings>) -> Result<HamiltonianSpec> {
    let pieces = Pieces::build(circuit)?;
    let couplings = match couplings {
        Some(c) => c,
        None => choose_couplings(circuit.n(), circuit.rounds(), circuit)?,
    };
    assemble(&pieces, circuit.n(), circuit.rounds(), couplings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_roundtrip() {
        for idx in 0..8 {
            let (s, b) = LocalBasis::decode(idx);
            assert_eq!(LocalBasis::index(s, b), idx);
        }
        assert_eq!(LocalBasis::index(Symbol::Gate, 1), 7);
        assert_eq!(LocalBasis::LABELS[LocalBasis::index(Symbol::Dead, 0)], "DEAD");
    }
}
