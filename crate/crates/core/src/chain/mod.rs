//! Configuration space of the eight-state chain.
//!
//! A configuration assigns one of six symbols to each of the `N = 2nR` sites;
//! `GATE` and `QUBIT` additionally carry one bit of qubit content, which is
//! tracked elsewhere (module `spectra`). Sites and pairs are 1-based: pair
//! `i` is the adjacent pair `(i, i+1)`.

mod classify;
mod pairs;
mod rules;
mod templates;

pub use classify::{
    classify, classify_with, detect_horizon, detect_horizon_with, enumerate_allowed, exchange_horizon, exchanges, invariant_set,
    invariant_set_with, neighbors, shapes_at, ConfigClass, Exchange, Horizon, InvariantSet, ProjectorRole,
    ShapeProjector, TermShape, UndetectableReason, Witness, DEFAULT_BFS_CAP,
};
pub use pairs::{endpoint_violation, PairTable, ALLOWED_PAIR_COUNT, FORBIDDEN_FAMILY_COUNT};
pub use rules::{
    apply_rule, backward_rules, forward_rules, legal_sequence, legal_sequence_with, Direction, Rule, RuleId,
    RuleInstance, RuleSet, Seam,
};
pub use templates::{legal_index, round_templates, LegalIndex};

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Symbol {
    Dead = 0,
    Blank = 1,
    Insi = 2,
    Pusher = 3,
    Qubit = 4,
    Gate = 5,
}

impl Symbol {
    pub const ALL: [Symbol; 6] = [Symbol::Dead, Symbol::Blank, Symbol::Insi, Symbol::Pusher, Symbol::Qubit, Symbol::Gate];

    pub fn from_char(c: char) -> Option<Symbol> {
        Some(match c {
            'x' => Symbol::Dead,
            '.' => Symbol::Blank,
            'i' => Symbol::Insi,
            '<' => Symbol::Pusher,
            'q' => Symbol::Qubit,
            'g' => Symbol::Gate,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            Symbol::Dead => 'x',
            Symbol::Blank => '.',
            Symbol::Insi => 'i',
            Symbol::Pusher => '<',
            Symbol::Qubit => 'q',
            Symbol::Gate => 'g',
        }
    }

    /// `QUBIT` and `GATE` carry a qubit.
    pub fn holds_qubit(self) -> bool {
        matches!(self, Symbol::Qubit | Symbol::Gate)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocationType {
    A,
    B,
    C,
    D,
    E,
}

impl LocationType {
    pub const ALL: [LocationType; 5] = [LocationType::A, LocationType::B, LocationType::C, LocationType::D, LocationType::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C', 'D', 'E'][self as usize]
    }
}

impl fmt::Display for LocationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Location type of pair `(i, i+1)` on a chain with `rounds` blocks of `2n`.
pub fn location_type(i: usize, n: usize, rounds: usize) -> Result<LocationType> {
    let len = 2 * n * rounds;
    if i == 0 || i >= len {
        return Err(Error::PairOutOfRange { index: i, max: len.saturating_sub(1) });
    }
    let block = 2 * n;
    let offset = (i - 1) % block + 1; // position of site i inside its block, 1..=2n
    Ok(if offset == 1 {
        LocationType::C
    } else if offset == block - 1 {
        LocationType::E
    } else if offset == block {
        LocationType::D
    } else if i % 2 == 0 {
        LocationType::B
    } else {
        LocationType::A
    })
}

/// Kind of seam between sites `j` and `j+1` (seam 0 and seam `N` are the chain ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeamKind {
    Boundary,
    Even,
    Odd,
}

pub fn seam_kind(j: usize, n: usize, rounds: usize) -> SeamKind {
    let len = 2 * n * rounds;
    if j == 0 || j >= len || j % (2 * n) == 0 {
        SeamKind::Boundary
    } else if j % 2 == 0 {
        SeamKind::Even
    } else {
        SeamKind::Odd
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    n: usize,
    rounds: usize,
    sites: Vec<Symbol>,
}

impl Configuration {
    pub fn new(n: usize, rounds: usize, sites: Vec<Symbol>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewQubits(n));
        }
        if rounds == 0 {
            return Err(Error::InvalidArgument("need at least one block".into()));
        }
        if sites.len() != 2 * n * rounds {
            return Err(Error::ShapeMismatch(format!(
                "configuration has {} sites, expected 2nR = {}",
                sites.len(),
                2 * n * rounds
            )));
        }
        Ok(Configuration { n, rounds, sites })
    }

    /// Parses the one-character-per-site notation; `|`, `:` and whitespace are ignored.
    pub fn parse(n: usize, rounds: usize, text: &str) -> Result<Self> {
        let mut sites = Vec::with_capacity(text.len());
        for c in text.chars() {
            if c == '|' || c == ':' || c.is_whitespace() {
                continue;
            }
            sites.push(Symbol::from_char(c).ok_or_else(|| Error::Parse(format!("unknown site symbol {c:?}")))?);
        }
        Configuration::new(n, rounds, sites)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Symbol at 1-based site `i`.
    pub fn get(&self, i: usize) -> Symbol {
        self.sites[i - 1]
    }

    pub fn set(&mut self, i: usize, s: Symbol) {
        self.sites[i - 1] = s;
    }

    pub fn sites(&self) -> &[Symbol] {
        &self.sites
    }

    pub fn location(&self, i: usize) -> LocationType {
        location_type(i, self.n, self.rounds).expect("pair index inside chain")
    }

    pub fn seam(&self, j: usize) -> SeamKind {
        seam_kind(j, self.n, self.rounds)
    }

    pub fn qubit_count(&self) -> usize {
        self.sites.iter().filter(|s| s.holds_qubit()).count()
    }

    /// 1-based positions of the qubit-holding sites, left to right.
    pub fn qubit_sites(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&i| self.get(i).holds_qubit()).collect()
    }

    /// Packs the symbols into an integer, three bits per site (site 1 highest).
    /// Only valid for chains of at most 21 sites.
    pub fn key(&self) -> u64 {
        debug_assert!(self.len() <= 21);
        self.sites.iter().fold(0u64, |acc, s| (acc << 3) | *s as u64)
    }

    /// Site string without separators.
    pub fn compact(&self) -> String {
        self.sites.iter().map(|s| s.to_char()).collect()
    }

    /// Site string with `|` at every block boundary, including both ends.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.len() + self.rounds + 1);
        out.push('|');
        for (k, s) in self.sites.iter().enumerate() {
            out.push(s.to_char());
            if (k + 1) % (2 * self.n) == 0 {
                out.push('|');
            }
        }
        out
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// `g i (q i)^(n-2) q .` followed by blanks.
pub fn initial_configuration(n: usize, rounds: usize) -> Result<Configuration> {
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let mut sites = vec![Symbol::Blank; 2 * n * rounds];
    sites[0] = Symbol::Gate;
    for k in 0..n - 1 {
        sites[2 * k + 1] = Symbol::Insi;
        sites[2 * k + 2] = Symbol::Qubit;
    }
    sites[2 * n - 1] = Symbol::Blank;
    Configuration::new(n, rounds, sites)
}

/// Number of transitions in the legal sequence, counted from the rules:
/// `R - 1` full rounds of `3n^2 + 2n - 1` steps and a final gate sweep of `2n - 1`.
pub fn step_count(n: usize, rounds: usize) -> usize {
    (rounds - 1) * (3 * n * n + 2 * n - 1) + 2 * n - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn location_examples() {
        assert_eq!(location_type(1, 3, 2).unwrap(), LocationType::C);
        assert_eq!(location_type(6, 3, 2).unwrap(), LocationType::D);
        assert_eq!(location_type(3, 3, 2).unwrap(), LocationType::A);
        assert_eq!(location_type(5, 3, 2).unwrap(), LocationType::E);
        assert_eq!(location_type(2, 3, 2).unwrap(), LocationType::B);
        assert_eq!(location_type(7, 3, 2).unwrap(), LocationType::C);
        assert_eq!(location_type(11, 3, 2).unwrap(), LocationType::E);
        assert!(location_type(12, 3, 2).is_err());
        assert!(location_type(0, 3, 2).is_err());
    }

    #[test]
    fn location_partition_matches_definition() {
        for n in 2..7 {
            for rounds in 1..5 {
                let len = 2 * n * rounds;
                for i in 1..len {
                    let c = (1..=rounds).any(|k| i == 2 * (k - 1) * n + 1);
                    let e = (1..=rounds).any(|k| i == 2 * k * n - 1);
                    let d = (1..rounds).any(|k| i == 2 * k * n);
                    let b = i % 2 == 0 && !d;
                    let a = i % 2 == 1 && !c && !e;
                    let hits = [a, b, c, d, e];
                    assert_eq!(hits.iter().filter(|&&h| h).count(), 1, "n={n} R={rounds} i={i}");
                    let t = location_type(i, n, rounds).unwrap();
                    assert!(hits[t.index()]);
                }
                if n == 2 {
                    assert!((1..len).all(|i| location_type(i, n, rounds).unwrap() != LocationType::A));
                }
            }
        }
    }

    #[test]
    fn initial_configurations() {
        assert_eq!(initial_configuration(2, 2).unwrap().compact(), "giq.....");
        assert_eq!(initial_configuration(3, 2).unwrap().compact(), "giqiq.......");
        assert_eq!(initial_configuration(2, 1).unwrap().compact(), "giq.");
        assert!(matches!(initial_configuration(1, 2), Err(Error::TooFewQubits(1))));
        assert!(matches!(initial_configuration(2, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn render_and_parse_roundtrip() {
        let c = initial_configuration(3, 2).unwrap();
        assert_eq!(c.render(), "|giqiq.|......|");
        assert_eq!(Configuration::parse(3, 2, &c.render()).unwrap(), c);
        assert!(Configuration::parse(3, 2, "giqiq").is_err());
        assert!(Configuration::parse(2, 1, "giqz").is_err());
    }
}
