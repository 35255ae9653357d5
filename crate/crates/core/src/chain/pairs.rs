//! Allowed neighbor pairs per location type, and the chain-end constraints.

use super::{Configuration, LocationType, Symbol};

pub const ALLOWED_PAIR_COUNT: usize = 56;
pub const FORBIDDEN_FAMILY_COUNT: usize = 124;

const A: u8 = 1 << 0;
const B: u8 = 1 << 1;
const C: u8 = 1 << 2;
const D: u8 = 1 << 3;
const E: u8 = 1 << 4;
const ALL: u8 = A | B | C | D | E;

/// Rows: left symbol, columns: right symbol, both in `Symbol::ALL` order
/// (x . i < q g). Entries are bitmasks of allowed location types.
const STANDARD: [[u8; 6]; 6] = [
    /* x */ [ALL, 0, 0, A | C | E, A | B | C | E, C | D],
    /* . */ [0, ALL, 0, 0, 0, 0],
    /* i */ [0, 0, 0, A | C | E, ALL, A | E],
    /* < */ [0, A | C | E, A | C | E, 0, B | D, 0],
    /* q */ [0, A | B | C | E, ALL, B | D, B | D, B],
    /* g */ [0, D | E, A | C, 0, B, 0],
];

/// Table of allowed `(left, right, location type)` triples.
///
/// [`PairTable::standard`] is the construction's table; the setters exist so
/// tests can inject faults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTable {
    allowed: [[u8; 6]; 6],
}

impl Default for PairTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl PairTable {
    pub fn standard() -> Self {
        PairTable { allowed: STANDARD }
    }

    pub fn allowed(&self, x: Symbol, y: Symbol, t: LocationType) -> bool {
        self.allowed[x.index()][y.index()] & (1 << t.index()) != 0
    }

    pub fn set_allowed(&mut self, x: Symbol, y: Symbol, t: LocationType, allowed: bool) {
        let bit = 1 << t.index();
        let cell = &mut self.allowed[x.index()][y.index()];
        if allowed {
            *cell |= bit;
        } else {
            *cell &= !bit;
        }
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().flatten().map(|m| m.count_ones() as usize).sum()
    }

    /// Forbidden `(left, right, type)` families in canonical order
    /// (left symbol, right symbol, location type).
    pub fn forbidden_families(&self) -> Vec<(Symbol, Symbol, LocationType)> {
        let mut out = Vec::new();
        for x in Symbol::ALL {
            for y in Symbol::ALL {
                for t in LocationType::ALL {
                    if !self.allowed(x, y, t) {
                        out.push((x, y, t));
                    }
                }
            }
        }
        out
    }

    /// First pair `(i, type)` holding a forbidden pair, if any.
    pub fn first_violation(&self, c: &Configuration) -> Option<(usize, LocationType)> {
        (1..c.len()).find_map(|i| {
            let t = c.location(i);
            (!self.allowed(c.get(i), c.get(i + 1), t)).then_some((i, t))
        })
    }

    /// Number of forbidden pairs in `c`.
    pub fn violation_count(&self, c: &Configuration) -> usize {
        (1..c.len()).filter(|&i| !self.allowed(c.get(i), c.get(i + 1), c.location(i))).count()
    }
}

/// Which chain end (if any) breaks the endpoint rule: the leftmost site must
/// be `x` or `g`, the rightmost `g` or `.`.
pub fn endpoint_violation(c: &Configuration) -> Option<usize> {
    if !matches!(c.get(1), Symbol::Dead | Symbol::Gate) {
        return Some(1);
    }
    if !matches!(c.get(c.len()), Symbol::Gate | Symbol::Blank) {
        return Some(c.len());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census() {
        let t = PairTable::standard();
        assert_eq!(t.allowed_count(), ALLOWED_PAIR_COUNT);
        assert_eq!(t.forbidden_families().len(), FORBIDDEN_FAMILY_COUNT);
        assert_eq!(36 * 5 - ALLOWED_PAIR_COUNT, FORBIDDEN_FAMILY_COUNT);
    }

    #[test]
    fn spot_checks() {
        let t = PairTable::standard();
        for lt in LocationType::ALL {
            assert!(!t.allowed(Symbol::Dead, Symbol::Blank, lt));
            assert!(t.allowed(Symbol::Insi, Symbol::Qubit, lt));
        }
        assert!(t.allowed(Symbol::Qubit, Symbol::Qubit, LocationType::B));
        assert!(!t.allowed(Symbol::Qubit, Symbol::Qubit, LocationType::A));
        assert!(t.allowed(Symbol::Gate, Symbol::Blank, LocationType::D));
        assert!(!t.allowed(Symbol::Gate, Symbol::Blank, LocationType::B));
    }

    #[test]
    fn setter_changes_census() {
        let mut t = PairTable::standard();
        t.set_allowed(Symbol::Dead, Symbol::Blank, LocationType::A, true);
        assert_eq!(t.allowed_count(), 57);
        t.set_allowed(Symbol::Dead, Symbol::Blank, LocationType::A, false);
        assert_eq!(t, PairTable::standard());
    }
}
