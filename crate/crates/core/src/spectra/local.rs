//! Term lists compiled into column lookups, shared by the restricted and
//! full-space operators.

use num_complex::Complex64 as C64;

use crate::chain::{Configuration, Symbol};
use crate::hamiltonian::{HamiltonianSpec, LocalBasis};

pub(crate) struct CompiledTerm {
    pub first: usize,
    pub two_site: bool,
    /// `columns[col]` lists `(row, coefficient * value)`.
    pub columns: Vec<Vec<(u8, C64)>>,
}

pub(crate) fn compile(h: &HamiltonianSpec) -> Vec<CompiledTerm> {
    h.terms
        .iter()
        .map(|t| {
            let coeff = h.coefficient(t);
            let dim = t.dim();
            let mut columns = vec![Vec::new(); dim];
            for &(r, c, v) in &t.entries {
                columns[c as usize].push((r, v * coeff));
            }
            CompiledTerm { first: t.sites[0], two_site: t.sites.len() == 2, columns }
        })
        .collect()
}

/// Holder ranks: `ranks[s]` = number of qubit-holding sites strictly left
/// of site `s` (1-based; entry 0 unused).
pub(crate) fn holder_ranks(c: &Configuration) -> Vec<usize> {
    let mut ranks = vec![0; c.len() + 2];
    for s in 1..=c.len() {
        ranks[s + 1] = ranks[s] + usize::from(c.get(s).holds_qubit());
    }
    ranks
}

fn site_digit(c: &Configuration, ranks: &[usize], u: usize, s: usize) -> usize {
    let sym = c.get(s);
    let bit = if sym.holds_qubit() { (u >> ranks[s]) & 1 } else { 0 };
    LocalBasis::index(sym, bit)
}

/// Applies one compiled term to basis state `(c, u)`, calling `emit` for
/// every output `(configuration, content, amplitude)`.
pub(crate) fn apply_term(
    term: &CompiledTerm,
    c: &Configuration,
    ranks: &[usize],
    u: usize,
    emit: &mut dyn FnMut(Configuration, usize, C64),
) {
    let a = term.first;
    if term.two_site {
        let col = 8 * site_digit(c, ranks, u, a) + site_digit(c, ranks, u, a + 1);
        for &(row, v) in &term.columns[col] {
            let (sa, ba) = LocalBasis::decode(row as usize / 8);
            let (sb, bb) = LocalBasis::decode(row as usize % 8);
            let (out_c, out_u) = replace(c, ranks, u, a, &[(sa, ba), (sb, bb)]);
            emit(out_c, out_u, v);
        }
    } else {
        let col = site_digit(c, ranks, u, a);
        for &(row, v) in &term.columns[col] {
            let (sa, ba) = LocalBasis::decode(row as usize);
            let (out_c, out_u) = replace(c, ranks, u, a, &[(sa, ba)]);
            emit(out_c, out_u, v);
        }
    }
}

/// Writes new symbols starting at site `a`; the window's holder count is
/// preserved by every term, so the content bits are overwritten in place.
fn replace(c: &Configuration, ranks: &[usize], u: usize, a: usize, new: &[(Symbol, usize)]) -> (Configuration, usize) {
    let mut out = c.clone();
    let mut out_u = u;
    let mut rank = ranks[a];
    for (k, &(s, b)) in new.iter().enumerate() {
        out.set(a + k, s);
        if s.holds_qubit() {
            out_u = (out_u & !(1 << rank)) | (b << rank);
            rank += 1;
        }
    }
    debug_assert_eq!(rank, ranks[a + new.len()], "term changed the qubit count");
    (out, out_u)
}
