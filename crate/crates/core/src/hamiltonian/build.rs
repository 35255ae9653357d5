use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::{Couplings, Family, LocalBasis, LocalTerm, PropPart};
use crate::chain::{exchanges, location_type, step_count, PairTable, ProjectorRole, Symbol};
use crate::circuit::{gate_at_location, LayeredCircuit};
use crate::error::{Error, Result};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn check_shape(n: usize, rounds: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    Ok(2 * n * rounds)
}

fn single_projector(family: Family, site: usize, idx: &[usize]) -> LocalTerm {
    LocalTerm {
        family,
        rule: None,
        part: None,
        location: None,
        anchor: site,
        sites: vec![site],
        weight: 1.0,
        entries: idx.iter().map(|&k| (k as u8, k as u8, ONE)).collect(),
    }
}

/// Diagonal entries of `|XY><XY|` summed over qubit content.
fn pair_projector_entries(x: Symbol, y: Symbol) -> Vec<(u8, u8, C64)> {
    let mut out = Vec::new();
    for &a in LocalBasis::span(x) {
        for &b in LocalBasis::span(y) {
            let k = (8 * a + b) as u8;
            out.push((k, k, ONE));
        }
    }
    out
}

fn site_projector_entries(s: Symbol) -> Vec<(u8, u8, C64)> {
    LocalBasis::span(s).iter().map(|&k| (k as u8, k as u8, ONE)).collect()
}

/// Input penalties: gate content 1 at site 1 and qubit content 1 at the
/// ancilla sites `2i - 1`, `i = 2..=n-m`.
pub fn build_h_in(n: usize, m: usize, rounds: usize) -> Result<Vec<LocalTerm>> {
    check_shape(n, rounds)?;
    if m > n {
        return Err(Error::InvalidArgument(format!("m = {m} exceeds n = {n}")));
    }
    let mut out = vec![single_projector(Family::In, 1, &[LocalBasis::index(Symbol::Gate, 1)])];
    for i in 2..=n - m {
        out.push(single_projector(Family::In, 2 * i - 1, &[LocalBasis::index(Symbol::Qubit, 1)]));
    }
    Ok(out)
}

/// Output penalty: gate content 0 at the last site.
pub fn build_h_out(n: usize, rounds: usize) -> Result<Vec<LocalTerm>> {
    let len = check_shape(n, rounds)?;
    Ok(vec![single_projector(Family::Out, len, &[LocalBasis::index(Symbol::Gate, 0)])])
}

/// Illegal-pair projectors from the standard pair table.
pub fn build_h_pen(n: usize, rounds: usize) -> Result<Vec<LocalTerm>> {
    build_h_pen_with(n, rounds, &PairTable::standard())
}

/// One projector per forbidden `(X, Y)` at every pair of the matching
/// location type, plus the two endpoint projectors.
pub fn build_h_pen_with(n: usize, rounds: usize, table: &PairTable) -> Result<Vec<LocalTerm>> {
    let len = check_shape(n, rounds)?;
    let mut out = Vec::new();
    for i in 1..len {
        let t = location_type(i, n, rounds)?;
        for x in Symbol::ALL {
            for y in Symbol::ALL {
                if table.allowed(x, y, t) {
                    continue;
                }
                out.push(LocalTerm {
                    family: Family::Pen,
                    rule: None,
                    part: None,
                    location: Some(t),
                    anchor: i,
                    sites: vec![i, i + 1],
                    weight: 1.0,
                    entries: pair_projector_entries(x, y),
                });
            }
        }
    }
    let left: Vec<usize> = [Symbol::Blank, Symbol::Qubit, Symbol::Pusher, Symbol::Insi]
        .iter()
        .flat_map(|&s| LocalBasis::span(s).iter().copied())
        .collect();
    let right: Vec<usize> = [Symbol::Dead, Symbol::Qubit, Symbol::Pusher, Symbol::Insi]
        .iter()
        .flat_map(|&s| LocalBasis::span(s).iter().copied())
        .collect();
    let mut l = single_projector(Family::Pen, 1, &left);
    l.entries.sort_by_key(|e| e.0);
    let mut r = single_projector(Family::Pen, len, &right);
    r.entries.sort_by_key(|e| e.0);
    out.push(l);
    out.push(r);
    Ok(out)
}

/// Off-diagonal entries of `-(|to><from| + h.c.)` for a content-preserving
/// exchange: holders in `from` hand their contents in order to holders in `to`.
fn exchange_entries(from: [Symbol; 2], to: [Symbol; 2]) -> Result<Vec<(u8, u8, C64)>> {
    let holders = |p: [Symbol; 2]| p.iter().filter(|s| s.holds_qubit()).count();
    let k = holders(from);
    if holders(to) != k {
        return Err(Error::Internal(format!("exchange {from:?} -> {to:?} changes the qubit count")));
    }
    let encode = |p: [Symbol; 2], bits: usize| {
        let mut used = 0;
        let mut idx = [0usize; 2];
        for (slot, s) in p.iter().enumerate() {
            let b = if s.holds_qubit() {
                used += 1;
                (bits >> (used - 1)) & 1
            } else {
                0
            };
            idx[slot] = LocalBasis::index(*s, b);
        }
        (8 * idx[0] + idx[1]) as u8
    };
    let mut out = Vec::new();
    for bits in 0..1usize << k {
        let (row, col) = (encode(to, bits), encode(from, bits));
        out.push((row, col, -ONE));
        out.push((col, row, -ONE));
    }
    Ok(out)
}

/// Entries of `-(U |qg><gq| + h.c.)` on the gate pair; `U` acts on the
/// contents `(left, right)` with index `2 * left + right`.
fn gate_entries(u: &crate::circuit::Mat4) -> Vec<(u8, u8, C64)> {
    let mut out = Vec::new();
    for s in 0..2 {
        for t in 0..2 {
            let col = 8 * LocalBasis::index(Symbol::Gate, s) + LocalBasis::index(Symbol::Qubit, t);
            for s2 in 0..2 {
                for t2 in 0..2 {
                    let v = u[2 * s2 + t2][2 * s + t];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let row = 8 * LocalBasis::index(Symbol::Qubit, s2) + LocalBasis::index(Symbol::Gate, t2);
                    out.push((row as u8, col as u8, -v));
                    out.push((col as u8, row as u8, -v.conj()));
                }
            }
        }
    }
    out
}

/// Propagation terms: for every pair and every rule family active at its
/// location type, the forward and backward projectors plus the transition
/// block. Every block carries weight 1/2, so that restricted to the legal
/// history the piece acts as the walk with unit diagonal.
///
/// Projectors that fall off the chain keep the in-chain site as a
/// single-site projector.
pub fn build_h_prop(circuit: &LayeredCircuit) -> Result<Vec<LocalTerm>> {
    let (n, rounds) = (circuit.n(), circuit.rounds());
    let len = check_shape(n, rounds)?;
    let mut out = Vec::new();
    for i in 1..len {
        let t = location_type(i, n, rounds)?;
        for shape in exchanges().iter().filter(|s| s.location == t) {
            let base = LocalTerm {
                family: Family::Prop,
                rule: Some(shape.family),
                part: Some(PropPart::Projector),
                location: Some(t),
                anchor: i,
                sites: Vec::new(),
                weight: 0.5,
                entries: Vec::new(),
            };
            for p in &shape.projectors {
                let j = i as isize + p.offset;
                let term = if j < 1 {
                    // only site 1 = pair[1] remains
                    LocalTerm { sites: vec![1], entries: site_projector_entries(p.pair[1]), ..base.clone() }
                } else if j as usize >= len {
                    LocalTerm { sites: vec![len], entries: site_projector_entries(p.pair[0]), ..base.clone() }
                } else {
                    let j = j as usize;
                    LocalTerm { sites: vec![j, j + 1], entries: pair_projector_entries(p.pair[0], p.pair[1]), ..base.clone() }
                };
                debug_assert!(matches!(p.role, ProjectorRole::Forward | ProjectorRole::Backward));
                out.push(term);
            }
            let mut entries = Vec::new();
            for e in &shape.exchanges {
                if shape.family == 1 {
                    let gate = gate_at_location(circuit, i)?;
                    entries.extend(gate_entries(&gate.matrix()));
                } else {
                    entries.extend(exchange_entries(e.from, e.to)?);
                }
            }
            out.push(LocalTerm { part: Some(PropPart::Transition), sites: vec![i, i + 1], entries, ..base });
        }
    }
    Ok(out)
}

/// Number of terms per family, location type and rule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermCensus {
    pub per_family: BTreeMap<String, usize>,
    pub pen_per_location: BTreeMap<char, usize>,
    pub prop_per_rule: BTreeMap<u8, usize>,
    pub prop_transitions: usize,
    /// Distinct forbidden `(pair, location type)` families among the
    /// two-site penalty terms.
    pub pen_families: usize,
    pub total: usize,
}

pub fn census(terms: &[LocalTerm]) -> TermCensus {
    let mut c = TermCensus::default();
    let mut families = std::collections::BTreeSet::new();
    for t in terms {
        if t.family == Family::Pen && t.sites.len() == 2 {
            if let (Some(&(k, _, _)), Some(l)) = (t.entries.first(), t.location) {
                let (x, y) = (LocalBasis::decode(k as usize / 8).0, LocalBasis::decode(k as usize % 8).0);
                families.insert((x, y, l.letter()));
            }
        }
        *c.per_family.entry(t.family.name().to_string()).or_default() += 1;
        if t.family == Family::Pen {
            let key = t.location.map(|l| l.letter()).unwrap_or('|');
            *c.pen_per_location.entry(key).or_default() += 1;
        }
        if let Some(r) = t.rule {
            *c.prop_per_rule.entry(r).or_default() += 1;
        }
        if t.part == Some(PropPart::Transition) {
            c.prop_transitions += 1;
        }
        c.total += 1;
    }
    c.pen_families = families.len();
    c
}

/// Bound on `||sum_t w_t M_t||` by the triangle inequality.
pub fn norm_bound(terms: &[LocalTerm]) -> f64 {
    terms.iter().map(|t| t.weight.abs() * t.norm_bound()).sum()
}

fn next_pow2_above(x: f64) -> f64 {
    let mut p = 1.0;
    while p <= x {
        p *= 2.0;
    }
    p
}

/// Smallest powers of two with
/// `j_in / (K+1) > 2 ||H_out||`,
/// `j_prop / (2 (K+1)^2) > 2 (||H_out|| + j_in ||H_in||)` and
/// `j_pen > 2 (j_in ||H_in|| + j_prop ||H_prop|| + ||H_out||)`,
/// norms replaced by triangle-inequality bounds.
pub fn choose_couplings(n: usize, rounds: usize, circuit: &LayeredCircuit) -> Result<Couplings> {
    if circuit.n() != n || circuit.rounds() != rounds {
        return Err(Error::ShapeMismatch(format!(
            "circuit has n = {}, R = {}, asked for n = {n}, R = {rounds}",
            circuit.n(),
            circuit.rounds()
        )));
    }
    let k = step_count(n, rounds) as f64;
    let out = norm_bound(&build_h_out(n, rounds)?);
    let inp = norm_bound(&build_h_in(n, circuit.m(), rounds)?);
    let prop = norm_bound(&build_h_prop(circuit)?);
    let j_in = next_pow2_above(2.0 * (k + 1.0) * out);
    let j_prop = next_pow2_above(2.0 * (k + 1.0).powi(2) * 2.0 * (out + j_in * inp));
    let j_pen = next_pow2_above(2.0 * (j_in * inp + j_prop * prop + out));
    Ok(Couplings { j_in, j_prop, j_pen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::FORBIDDEN_FAMILY_COUNT;
    use crate::circuit::GateKind;

    #[test]
    fn pen_terms_cover_every_forbidden_family() {
        let pen = build_h_pen(3, 2).unwrap();
        let mut fams = std::collections::BTreeSet::new();
        for t in &pen {
            if t.sites.len() == 2 {
                let (x, y) = {
                    let k = t.entries[0].0 as usize;
                    (LocalBasis::decode(k / 8).0, LocalBasis::decode(k % 8).0)
                };
                fams.insert((x, y, t.location.unwrap()));
            }
            assert!(t.projector_error() < 1e-15);
        }
        assert_eq!(fams.len(), FORBIDDEN_FAMILY_COUNT);
        assert_eq!(pen.iter().filter(|t| t.sites.len() == 1).count(), 2);
    }

    #[test]
    fn prop_blocks_are_hermitian() {
        let c = LayeredCircuit::from_kinds(2, 1, &[vec![GateKind::I], vec![GateKind::H]]).unwrap();
        for t in build_h_prop(&c).unwrap() {
            assert!(t.hermiticity_error() < 1e-15, "{t:?}");
            if t.part == Some(PropPart::Projector) {
                assert!(t.projector_error() < 1e-15);
            }
        }
    }

    #[test]
    fn couplings_satisfy_inequalities() {
        let c = LayeredCircuit::identity(2, 1, 2).unwrap();
        let j = choose_couplings(2, 2, &c).unwrap();
        let k = step_count(2, 2) as f64;
        assert!(j.j_in > 2.0 * (k + 1.0) && j.j_in <= 4.0 * (k + 1.0));
        for v in [j.j_in, j.j_prop, j.j_pen] {
            assert_eq!(v.log2().fract(), 0.0);
        }
        assert!(choose_couplings(3, 2, &c).is_err());
    }

    #[test]
    fn input_terms() {
        assert_eq!(build_h_in(3, 3, 1).unwrap().len(), 1);
        let t = build_h_in(4, 1, 1).unwrap();
        assert_eq!(t.iter().map(|t| t.sites[0]).collect::<Vec<_>>(), vec![1, 3, 5]);
        assert!(build_h_in(2, 3, 1).is_err());
    }
}
