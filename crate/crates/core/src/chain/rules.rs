//! Transition rules as data: each sub-rule is a before/after window plus
//! seam predicates, compiled once from a static table.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use super::{initial_configuration, seam_kind, Configuration, SeamKind, Symbol};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    R1,
    R2a,
    R2b,
    R2c,
    R3a,
    R3b,
    R3c,
    R3d,
    R4a,
    R4b,
    R5a,
    R5b,
    R6a,
    R6b,
}

impl RuleId {
    pub const ALL: [RuleId; 14] = [
        RuleId::R1,
        RuleId::R2a,
        RuleId::R2b,
        RuleId::R2c,
        RuleId::R3a,
        RuleId::R3b,
        RuleId::R3c,
        RuleId::R3d,
        RuleId::R4a,
        RuleId::R4b,
        RuleId::R5a,
        RuleId::R5b,
        RuleId::R6a,
        RuleId::R6b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::R1 => "1",
            RuleId::R2a => "2a",
            RuleId::R2b => "2b",
            RuleId::R2c => "2c",
            RuleId::R3a => "3a",
            RuleId::R3b => "3b",
            RuleId::R3c => "3c",
            RuleId::R3d => "3d",
            RuleId::R4a => "4a",
            RuleId::R4b => "4b",
            RuleId::R5a => "5a",
            RuleId::R5b => "5b",
            RuleId::R6a => "6a",
            RuleId::R6b => "6b",
        }
    }

    /// Rule family number 1..=6.
    pub fn family(self) -> u8 {
        self.name().as_bytes()[0] - b'0'
    }

    pub fn from_name(s: &str) -> Option<RuleId> {
        RuleId::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constraint on the seam between two window sites (or at a window edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seam {
    Any,
    /// Odd internal seam; implied between two adjacent pattern symbols.
    Odd,
    /// Even seam that is not a block boundary.
    Even,
    Boundary,
    /// Even seam or block boundary.
    EvenOrBoundary,
}

impl Seam {
    fn accepts(self, kind: SeamKind) -> bool {
        match self {
            Seam::Any => true,
            Seam::Odd => kind == SeamKind::Odd,
            Seam::Even => kind == SeamKind::Even,
            Seam::Boundary => kind == SeamKind::Boundary,
            Seam::EvenOrBoundary => kind != SeamKind::Odd,
        }
    }

    fn from_char(c: char) -> Option<Seam> {
        Some(match c {
            ':' => Seam::Even,
            '|' => Seam::Boundary,
            '*' => Seam::EvenOrBoundary,
            '?' => Seam::Any,
            _ => return None,
        })
    }
}

/// One sub-rule `before <-> after`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub before: Vec<Symbol>,
    pub after: Vec<Symbol>,
    /// `before.len() + 1` seam predicates, outer edges included.
    pub seams: Vec<Seam>,
    /// Window offset of the left site of the pair the rule rewrites.
    pub pair_offset: usize,
}

fn parse_pattern(text: &str) -> (Vec<Symbol>, Vec<Seam>) {
    let mut symbols = Vec::new();
    let mut seams = Vec::new();
    let mut pending: Option<Seam> = None;
    for c in text.chars() {
        if c == ' ' {
            continue;
        }
        if let Some(seam) = Seam::from_char(c) {
            pending = Some(seam);
            continue;
        }
        let sym = Symbol::from_char(c).unwrap_or_else(|| panic!("bad rule pattern symbol {c:?}"));
        let default = if symbols.is_empty() { Seam::Any } else { Seam::Odd };
        seams.push(pending.take().unwrap_or(default));
        symbols.push(sym);
    }
    seams.push(pending.unwrap_or(Seam::Any));
    (symbols, seams)
}

impl Rule {
    /// Builds a rule from the compact notation: symbols `x . i < q g`,
    /// seams `:` (even, not a boundary), `|` (boundary), `*` (even or
    /// boundary), `?` (anything). Two adjacent symbols have an odd seam
    /// between them; an unmarked window edge is unconstrained.
    pub fn from_patterns(id: RuleId, before: &str, after: &str, pair_offset: usize) -> Rule {
        let (b, seams) = parse_pattern(before);
        let (a, seams_after) = parse_pattern(after);
        assert_eq!(seams, seams_after, "rule {id}: seam context differs between sides");
        assert_eq!(a.len(), b.len());
        assert!(pair_offset + 1 < b.len().max(2));
        Rule { id, before: b, after: a, seams, pair_offset }
    }

    pub fn width(&self) -> usize {
        self.before.len()
    }

    /// Does `pattern` match `c` with window site 0 at chain site `start`?
    fn matches(&self, c: &Configuration, start: usize, pattern: &[Symbol]) -> bool {
        let w = pattern.len();
        if start == 0 || start + w - 1 > c.len() {
            return false;
        }
        for (k, &sym) in pattern.iter().enumerate() {
            if c.get(start + k) != sym {
                return false;
            }
        }
        self.seams
            .iter()
            .enumerate()
            .all(|(k, seam)| seam.accepts(seam_kind(start - 1 + k, c.n(), c.rounds())))
    }

    /// True when the seam predicates accept window start `start` on a chain
    /// of the given shape, regardless of symbols.
    pub fn seams_fit(&self, n: usize, rounds: usize, start: usize) -> bool {
        let len = 2 * n * rounds;
        start >= 1
            && start + self.width() - 1 <= len
            && self.seams.iter().enumerate().all(|(k, seam)| seam.accepts(seam_kind(start - 1 + k, n, rounds)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// A rule applicable to a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleInstance {
    pub rule: RuleId,
    /// 1-based left site of the rewritten pair.
    pub position: usize,
    pub direction: Direction,
}

impl fmt::Display for RuleInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Forward => "",
            Direction::Backward => " backward",
        };
        write!(f, "rule {}{} at {}", self.rule, dir, self.position)
    }
}

const STANDARD: [(RuleId, &str, &str, usize); 14] = [
    (RuleId::R1, "g:q", "q:g", 0),
    (RuleId::R2a, ":gi:", ":ig:", 0),
    (RuleId::R2b, "|gi:", "|xg:", 0),
    (RuleId::R2c, ":g.|", ":ig|", 0),
    (RuleId::R3a, "x:qi*q", "x:xq*q", 1),
    (RuleId::R3b, "q*qi*q", "q*iq*q", 1),
    (RuleId::R3c, "q*q.:.", "q*iq:.", 1),
    (RuleId::R3d, "x*q.*.", "x*xq*.", 1),
    (RuleId::R4a, "g|..", "q|<.", 0),
    (RuleId::R4b, "q:..", "q:<.", 0),
    (RuleId::R5a, "?q*<", "?<*q", 0),
    (RuleId::R5b, "*i<*", "*<i*", 0),
    (RuleId::R6a, "x<|q", "xx|g", 1),
    (RuleId::R6b, "x<:q", "xx:q", 1),
];

/// An ordered collection of sub-rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::standard()
    }
}

fn standard_set() -> &'static RuleSet {
    static SET: OnceLock<RuleSet> = OnceLock::new();
    SET.get_or_init(|| RuleSet {
        rules: STANDARD.iter().map(|&(id, b, a, off)| Rule::from_patterns(id, b, a, off)).collect(),
    })
}

impl RuleSet {
    pub fn standard() -> Self {
        standard_set().clone()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Mutable access, for fault injection.
    pub fn rules_mut(&mut self) -> &mut Vec<Rule> {
        &mut self.rules
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    fn instances(&self, c: &Configuration, direction: Direction) -> Vec<RuleInstance> {
        let mut out = Vec::new();
        for rule in &self.rules {
            let pattern = match direction {
                Direction::Forward => &rule.before,
                Direction::Backward => &rule.after,
            };
            if pattern.len() > c.len() {
                continue;
            }
            for start in 1..=c.len() + 1 - pattern.len() {
                if rule.matches(c, start, pattern) {
                    out.push(RuleInstance { rule: rule.id, position: start + rule.pair_offset, direction });
                }
            }
        }
        out
    }

    pub fn forward_rules(&self, c: &Configuration) -> Vec<RuleInstance> {
        self.instances(c, Direction::Forward)
    }

    pub fn backward_rules(&self, c: &Configuration) -> Vec<RuleInstance> {
        self.instances(c, Direction::Backward)
    }

    pub fn apply(&self, c: &Configuration, inst: RuleInstance) -> Result<Configuration> {
        let not_applicable = || Error::RuleNotApplicable(format!("{inst} on {c}"));
        let rule = self.get(inst.rule).ok_or_else(not_applicable)?;
        let start = inst.position.checked_sub(rule.pair_offset).ok_or_else(not_applicable)?;
        let (from, to) = match inst.direction {
            Direction::Forward => (&rule.before, &rule.after),
            Direction::Backward => (&rule.after, &rule.before),
        };
        if !rule.matches(c, start, from) {
            return Err(not_applicable());
        }
        let mut out = c.clone();
        for (k, &sym) in to.iter().enumerate() {
            out.set(start + k, sym);
        }
        Ok(out)
    }

    /// Runs the rules forward from the initial configuration, pairing each
    /// configuration with the rule that leads to the next one.
    pub fn legal_trace(&self, n: usize, rounds: usize) -> Result<Vec<(Configuration, Option<RuleInstance>)>> {
        let mut current = initial_configuration(n, rounds)?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let cap = 4 * super::step_count(n, rounds) + 64;
        loop {
            if !seen.insert(current.clone()) {
                return Err(Error::Internal(format!("configuration {current} repeats in the forward evolution")));
            }
            let fwd = self.forward_rules(&current);
            match fwd.len() {
                0 => {
                    out.push((current, None));
                    return Ok(out);
                }
                1 => {
                    let next = self.apply(&current, fwd[0])?;
                    out.push((current, Some(fwd[0])));
                    current = next;
                }
                _ => {
                    let names: Vec<String> = fwd.iter().map(|r| r.to_string()).collect();
                    return Err(Error::Internal(format!(
                        "{} forward rules apply to {current}: {}",
                        fwd.len(),
                        names.join(", ")
                    )));
                }
            }
            if out.len() > cap {
                return Err(Error::Internal("forward evolution does not halt".into()));
            }
        }
    }
}

pub fn forward_rules(c: &Configuration) -> Vec<RuleInstance> {
    standard_set().forward_rules(c)
}

pub fn backward_rules(c: &Configuration) -> Vec<RuleInstance> {
    standard_set().backward_rules(c)
}

pub fn apply_rule(c: &Configuration, inst: RuleInstance) -> Result<Configuration> {
    standard_set().apply(c, inst)
}

/// `C_0 .. C_K` under the standard rules.
pub fn legal_sequence(n: usize, rounds: usize) -> Result<Vec<Configuration>> {
    legal_sequence_with(standard_set(), n, rounds)
}

pub fn legal_sequence_with(rules: &RuleSet, n: usize, rounds: usize) -> Result<Vec<Configuration>> {
    Ok(rules.legal_trace(n, rounds)?.into_iter().map(|(c, _)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::super::{step_count, LocationType};
    use super::*;
    use std::collections::BTreeSet;

    fn cfg(n: usize, r: usize, s: &str) -> Configuration {
        Configuration::parse(n, r, s).unwrap()
    }

    #[test]
    fn sequence_lengths_follow_rule_count() {
        assert_eq!(legal_sequence(3, 2).unwrap().len(), 38);
        assert_eq!(legal_sequence(2, 2).unwrap().len(), 19);
        for n in 2..6 {
            for r in 1..4 {
                let seq = legal_sequence(n, r).unwrap();
                assert_eq!(seq.len(), step_count(n, r) + 1, "n={n} R={r}");
                let distinct: HashSet<_> = seq.iter().collect();
                assert_eq!(distinct.len(), seq.len());
                assert!(seq.iter().all(|c| c.qubit_count() == n));
            }
        }
    }

    #[test]
    fn sequence_ends_in_final_configuration() {
        let seq = legal_sequence(3, 2).unwrap();
        assert_eq!(seq.last().unwrap().compact(), "xxxxxxxqiqig");
        assert!(forward_rules(seq.last().unwrap()).is_empty());
    }

    #[test]
    fn first_step_is_rule_2b() {
        let c0 = initial_configuration(3, 2).unwrap();
        let fwd = forward_rules(&c0);
        assert_eq!(fwd, vec![RuleInstance { rule: RuleId::R2b, position: 1, direction: Direction::Forward }]);
        assert!(backward_rules(&c0).is_empty());
        let c1 = apply_rule(&c0, fwd[0]).unwrap();
        assert_eq!(c1.compact(), "xgqiq.......");
        let back = backward_rules(&c1);
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].rule, RuleId::R2b);
        assert_eq!(apply_rule(&c1, back[0]).unwrap(), c0);
    }

    #[test]
    fn pusher_creation_and_push() {
        let c = cfg(3, 2, "xqiqig|......");
        let fwd = forward_rules(&c);
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd[0].rule, RuleId::R4a);
        assert_eq!(apply_rule(&c, fwd[0]).unwrap().compact(), "xqiqiq<.....");
        let c7 = cfg(3, 2, "xqiqiq|<.....");
        assert_eq!(forward_rules(&c7)[0].rule, RuleId::R5a);
        let c13 = cfg(3, 2, "xxqiqi|q.....");
        let back = backward_rules(&c13);
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].rule, RuleId::R6b);
    }

    #[test]
    fn apply_rejects_wrong_instance() {
        let c0 = initial_configuration(3, 2).unwrap();
        let bogus = RuleInstance { rule: RuleId::R1, position: 1, direction: Direction::Forward };
        assert!(matches!(apply_rule(&c0, bogus), Err(Error::RuleNotApplicable(_))));
    }

    /// Location types each sub-rule can rewrite, from the seam predicates alone.
    #[test]
    fn rewritten_pair_location_types() {
        let expected: &[(RuleId, &str)] = &[
            (RuleId::R1, "B"),
            (RuleId::R2a, "A"),
            (RuleId::R2b, "C"),
            (RuleId::R2c, "E"),
            (RuleId::R3a, "AE"),
            (RuleId::R3b, "ACE"),
            (RuleId::R3c, "AC"),
            (RuleId::R3d, "ACE"),
            (RuleId::R4a, "D"),
            (RuleId::R4b, "B"),
            (RuleId::R5a, "BD"),
            (RuleId::R5b, "ACE"),
            (RuleId::R6a, "D"),
            (RuleId::R6b, "B"),
        ];
        let set = RuleSet::standard();
        for &(id, types) in expected {
            let rule = set.get(id).unwrap();
            let mut seen = BTreeSet::new();
            for n in 2..6 {
                for r in 2..4 {
                    for start in 1..=2 * n * r {
                        if rule.seams_fit(n, r, start) {
                            let i = start + rule.pair_offset;
                            seen.insert(super::super::location_type(i, n, r).unwrap().letter());
                        }
                    }
                }
            }
            let got: String = seen.into_iter().collect();
            assert_eq!(got, types, "rule {id}");
        }
        let _ = LocationType::A;
    }

    #[test]
    fn one_rule_per_legal_step() {
        for n in 2..5 {
            for r in 1..4 {
                let trace = RuleSet::standard().legal_trace(n, r).unwrap();
                for (t, (c, inst)) in trace.iter().enumerate() {
                    let back = backward_rules(c);
                    assert_eq!(back.len(), usize::from(t > 0), "{c}");
                    if let Some(inst) = inst {
                        let next = apply_rule(c, *inst).unwrap();
                        assert_eq!(next, trace[t + 1].0);
                    }
                }
            }
        }
    }
}
