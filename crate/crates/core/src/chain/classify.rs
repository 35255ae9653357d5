//! Configuration classes, the two-site exchange catalogue that drives the
//! propagation terms, invariant sets, and detection horizons.

use std::collections::{HashMap, HashSet, VecDeque};

use super::pairs::endpoint_violation;
use super::rules::RuleSet;
use super::templates::legal_index;
use super::{location_type, Configuration, LocationType, PairTable, Symbol};
use crate::error::{Error, Result};

pub const DEFAULT_BFS_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndetectableReason {
    WrongQubitCount,
    Misaligned,
}

/// Concrete evidence that a configuration carries a penalized pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    Pair { site: usize, left: Symbol, right: Symbol, location: LocationType },
    Endpoint { site: usize, symbol: Symbol },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigClass {
    Legal { step: usize },
    DetectableIllegal(Witness),
    UndetectableIllegal(UndetectableReason),
}

impl ConfigClass {
    pub fn is_legal(&self) -> bool {
        matches!(self, ConfigClass::Legal { .. })
    }

    pub fn is_detectable(&self) -> bool {
        matches!(self, ConfigClass::DetectableIllegal(_))
    }

    pub fn is_undetectable(&self) -> bool {
        matches!(self, ConfigClass::UndetectableIllegal(_))
    }
}

pub fn classify(c: &Configuration) -> ConfigClass {
    classify_with(c, &PairTable::standard())
}

pub fn classify_with(c: &Configuration, pairs: &PairTable) -> ConfigClass {
    if let Some((site, location)) = pairs.first_violation(c) {
        return ConfigClass::DetectableIllegal(Witness::Pair {
            site,
            left: c.get(site),
            right: c.get(site + 1),
            location,
        });
    }
    if let Some(site) = endpoint_violation(c) {
        return ConfigClass::DetectableIllegal(Witness::Endpoint { site, symbol: c.get(site) });
    }
    if let Some(step) = legal_index(c) {
        return ConfigClass::Legal { step };
    }
    if c.qubit_count() != c.n() {
        ConfigClass::UndetectableIllegal(UndetectableReason::WrongQubitCount)
    } else {
        ConfigClass::UndetectableIllegal(UndetectableReason::Misaligned)
    }
}

/// Whether a projector identifies the forward (`XY`) or backward (`ZW`) side
/// of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorRole {
    Forward,
    Backward,
}

/// Two-site projector of a propagation term, placed at pair `i + offset`
/// relative to the transition pair `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeProjector {
    pub offset: isize,
    pub pair: [Symbol; 2],
    pub role: ProjectorRole,
}

/// Transition `from -> to` on the pair `(i, i+1)`; the term also contains the
/// reverse direction. Only family 1 carries a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exchange {
    pub from: [Symbol; 2],
    pub to: [Symbol; 2],
}

/// Propagation term of one rule family at one location type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermShape {
    pub family: u8,
    pub location: LocationType,
    pub projectors: Vec<ShapeProjector>,
    pub exchanges: Vec<Exchange>,
}

fn sym(c: char) -> Symbol {
    Symbol::from_char(c).expect("catalogue symbol")
}

fn p2(s: &str) -> [Symbol; 2] {
    let mut it = s.chars();
    [sym(it.next().unwrap()), sym(it.next().unwrap())]
}

fn proj(offset: isize, pair: &str, role: ProjectorRole) -> ShapeProjector {
    ShapeProjector { offset, pair: p2(pair), role }
}

fn ex(from: &str, to: &str) -> Exchange {
    Exchange { from: p2(from), to: p2(to) }
}

/// Every propagation term shape, in canonical (family, location) order.
pub fn exchanges() -> &'static [TermShape] {
    use std::sync::OnceLock;
    use LocationType::*;
    use ProjectorRole::{Backward as Bw, Forward as Fw};
    static CAT: OnceLock<Vec<TermShape>> = OnceLock::new();
    CAT.get_or_init(|| {
        let mut out = Vec::new();
        let mut add = |family: u8, location, projectors: Vec<ShapeProjector>, exchanges: Vec<Exchange>| {
            out.push(TermShape { family, location, projectors, exchanges });
        };
        add(1, B, vec![proj(0, "gq", Fw), proj(0, "qg", Bw)], vec![ex("gq", "qg")]);

        add(2, A, vec![proj(0, "gi", Fw), proj(0, "ig", Bw)], vec![ex("gi", "ig")]);
        add(2, C, vec![proj(0, "gi", Fw), proj(0, "xg", Bw)], vec![ex("gi", "xg")]);
        add(2, E, vec![proj(0, "g.", Fw), proj(0, "ig", Bw)], vec![ex("g.", "ig")]);

        let rule3 = || {
            vec![proj(-1, "qq", Fw), proj(1, "qq", Bw), proj(-1, "xq", Fw), proj(1, "q.", Bw)]
        };
        add(3, A, rule3(), vec![ex("qi", "iq"), ex("q.", "xq"), ex("qi", "xq"), ex("q.", "iq")]);
        add(3, C, rule3(), vec![ex("qi", "iq"), ex("q.", "xq"), ex("q.", "iq")]);
        add(3, E, rule3(), vec![ex("qi", "iq"), ex("q.", "xq"), ex("qi", "xq")]);

        add(4, B, vec![proj(0, "q.", Fw), proj(1, "<.", Bw)], vec![ex("q.", "q<")]);
        add(4, D, vec![proj(0, "g.", Fw), proj(1, "<.", Bw)], vec![ex("g.", "q<")]);

        for location in [A, C, E] {
            add(5, location, vec![proj(0, "i<", Fw), proj(0, "<i", Bw)], vec![ex("i<", "<i")]);
        }
        for location in [B, D] {
            add(5, location, vec![proj(0, "q<", Fw), proj(0, "<q", Bw)], vec![ex("q<", "<q")]);
        }

        add(6, B, vec![proj(-1, "x<", Fw), proj(0, "xq", Bw)], vec![ex("<q", "xq")]);
        add(6, D, vec![proj(-1, "x<", Fw), proj(0, "xg", Bw)], vec![ex("<q", "xg")]);
        out.sort_by_key(|s| (s.family, s.location));
        out
    })
}

/// Term shapes active at a location type.
pub fn shapes_at(t: LocationType) -> impl Iterator<Item = &'static TermShape> {
    exchanges().iter().filter(move |s| s.location == t)
}

/// Configurations reachable from `c` by one exchange (either direction) of
/// any propagation term. Gate content is ignored.
pub fn neighbors(c: &Configuration) -> Vec<Configuration> {
    let mut out = Vec::new();
    for i in 1..c.len() {
        let here = [c.get(i), c.get(i + 1)];
        for shape in shapes_at(c.location(i)) {
            for e in &shape.exchanges {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if here == a {
                        let mut next = c.clone();
                        next.set(i, b[0]);
                        next.set(i + 1, b[1]);
                        if !out.contains(&next) {
                            out.push(next);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Per-chain lookup of exchanges in packed-key form.
struct KeyGraph {
    len: usize,
    /// For each pair `i` (index `i - 1`): map from packed `(left, right)` to
    /// the packed pairs it can turn into.
    moves: Vec<HashMap<u64, Vec<u64>>>,
}

impl KeyGraph {
    fn new(n: usize, rounds: usize) -> Self {
        let len = 2 * n * rounds;
        let mut moves = Vec::with_capacity(len - 1);
        for i in 1..len {
            let t = location_type(i, n, rounds).expect("pair inside chain");
            let mut map: HashMap<u64, Vec<u64>> = HashMap::new();
            for shape in shapes_at(t) {
                for e in &shape.exchanges {
                    let from = (e.from[0] as u64) << 3 | e.from[1] as u64;
                    let to = (e.to[0] as u64) << 3 | e.to[1] as u64;
                    for (a, b) in [(from, to), (to, from)] {
                        let entry = map.entry(a).or_default();
                        if !entry.contains(&b) {
                            entry.push(b);
                        }
                    }
                }
            }
            moves.push(map);
        }
        KeyGraph { len, moves }
    }

    fn for_each_neighbor(&self, key: u64, mut f: impl FnMut(u64)) {
        for i in 1..self.len {
            let shift = 3 * (self.len - i - 1);
            let pair = (key >> shift) & 0o77;
            if let Some(targets) = self.moves[i - 1].get(&pair) {
                for &t in targets {
                    f((key & !(0o77 << shift)) | (t << shift));
                }
            }
        }
    }
}

fn decode(key: u64, n: usize, rounds: usize) -> Configuration {
    let len = 2 * n * rounds;
    let sites = (0..len)
        .map(|k| Symbol::ALL[((key >> (3 * (len - 1 - k))) & 7) as usize])
        .collect();
    Configuration::new(n, rounds, sites).expect("decoded configuration")
}

/// BFS closure of a configuration under all exchanges.
#[derive(Debug, Clone)]
pub struct InvariantSet {
    /// Members sorted in canonical (lexicographic symbol) order.
    pub members: Vec<Configuration>,
    pub capped: bool,
}

impl InvariantSet {
    pub fn contains(&self, c: &Configuration) -> bool {
        self.members.binary_search(c).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn invariant_set(c: &Configuration, cap: usize) -> InvariantSet {
    invariant_set_with(c, cap)
}

/// BFS closure; stops once more than `cap` members are known and flags the
/// result as capped.
pub fn invariant_set_with(c: &Configuration, cap: usize) -> InvariantSet {
    let cap = cap.max(1);
    let (n, rounds) = (c.n(), c.rounds());
    let mut capped = false;
    let members: Vec<Configuration> = if c.len() <= 21 {
        let graph = KeyGraph::new(n, rounds);
        let start = c.key();
        let mut seen: HashSet<u64> = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        'bfs: while let Some(k) = queue.pop_front() {
            let mut stop = false;
            graph.for_each_neighbor(k, |next| {
                if !stop && seen.insert(next) {
                    queue.push_back(next);
                    if seen.len() > cap {
                        stop = true;
                    }
                }
            });
            if stop {
                capped = true;
                break 'bfs;
            }
        }
        seen.into_iter().map(|k| decode(k, n, rounds)).collect()
    } else {
        let mut seen: HashSet<Configuration> = HashSet::from([c.clone()]);
        let mut queue = VecDeque::from([c.clone()]);
        'bfs2: while let Some(cur) = queue.pop_front() {
            for next in neighbors(&cur) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                    if seen.len() > cap {
                        capped = true;
                        break 'bfs2;
                    }
                }
            }
        }
        seen.into_iter().collect()
    };
    let mut members = members;
    members.sort();
    InvariantSet { members, capped }
}

/// Forward-rule distance to the first detectable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Steps(usize),
    /// Forward evolution halts (or cycles) without meeting a detectable
    /// configuration; `explored` configurations were visited.
    Unreachable { explored: usize },
}

/// BFS over forward rule applications starting from an undetectable
/// configuration. With `bidirectional`, backward applications are also
/// followed.
pub fn detect_horizon_with(rules: &RuleSet, c: &Configuration, bidirectional: bool) -> Result<Horizon> {
    match classify(c) {
        ConfigClass::UndetectableIllegal(_) => {}
        other => {
            return Err(Error::Precondition(format!("{c} is not undetectable illegal ({other:?})")));
        }
    }
    let mut seen: HashSet<Configuration> = HashSet::from([c.clone()]);
    let mut queue = VecDeque::from([(c.clone(), 0usize)]);
    while let Some((cur, d)) = queue.pop_front() {
        let mut moves = rules.forward_rules(&cur);
        if bidirectional {
            moves.extend(rules.backward_rules(&cur));
        }
        for inst in moves {
            let next = rules.apply(&cur, inst)?;
            if seen.insert(next.clone()) {
                if classify(&next).is_detectable() {
                    return Ok(Horizon::Steps(d + 1));
                }
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(Horizon::Unreachable { explored: seen.len() })
}

pub fn detect_horizon(c: &Configuration) -> Result<Horizon> {
    detect_horizon_with(&RuleSet::standard(), c, false)
}

/// Distance from an undetectable configuration to the nearest detectable one
/// in the exchange graph (both directions of every propagation transition).
/// `None` if the explored component (up to `cap` members) has none.
pub fn exchange_horizon(c: &Configuration, cap: usize) -> Result<Option<usize>> {
    if !classify(c).is_undetectable() {
        return Err(Error::Precondition(format!("{c} is not undetectable illegal")));
    }
    let mut seen: HashSet<Configuration> = HashSet::from([c.clone()]);
    let mut queue = VecDeque::from([(c.clone(), 0usize)]);
    while let Some((cur, d)) = queue.pop_front() {
        for next in neighbors(&cur) {
            if seen.insert(next.clone()) {
                if classify(&next).is_detectable() {
                    return Ok(Some(d + 1));
                }
                if seen.len() > cap {
                    return Ok(None);
                }
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(None)
}

/// All configurations of shape `(n, R)` free of forbidden pairs and
/// endpoint violations, in lexicographic order.
pub fn enumerate_allowed(n: usize, rounds: usize, pairs: &PairTable) -> Result<Vec<Configuration>> {
    let len = 2 * n * rounds;
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    let mut out = Vec::new();
    let mut stack: Vec<Symbol> = Vec::with_capacity(len);
    fn rec(
        stack: &mut Vec<Symbol>,
        len: usize,
        n: usize,
        rounds: usize,
        pairs: &PairTable,
        out: &mut Vec<Configuration>,
    ) {
        if stack.len() == len {
            if matches!(stack[len - 1], Symbol::Gate | Symbol::Blank) {
                out.push(Configuration::new(n, rounds, stack.clone()).expect("shape"));
            }
            return;
        }
        for s in Symbol::ALL {
            if let Some(&prev) = stack.last() {
                let t = location_type(stack.len(), n, rounds).expect("pair inside chain");
                if !pairs.allowed(prev, s, t) {
                    continue;
                }
            } else if !matches!(s, Symbol::Dead | Symbol::Gate) {
                continue;
            }
            stack.push(s);
            rec(stack, len, n, rounds, pairs, out);
            stack.pop();
        }
    }
    rec(&mut stack, len, n, rounds, pairs, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{legal_sequence, LocationType};
    use super::*;

    fn cfg(n: usize, r: usize, s: &str) -> Configuration {
        Configuration::parse(n, r, s).unwrap()
    }

    #[test]
    fn legal_elements_classify_legal() {
        for (t, c) in legal_sequence(3, 2).unwrap().iter().enumerate() {
            assert_eq!(classify(c), ConfigClass::Legal { step: t });
        }
    }

    #[test]
    fn dead_blank_is_detectable() {
        let c = cfg(2, 2, "xx..|....");
        match classify(&c) {
            ConfigClass::DetectableIllegal(Witness::Pair { left, right, location, .. }) => {
                assert_eq!((left, right), (Symbol::Dead, Symbol::Blank));
                assert!(!PairTable::standard().allowed(left, right, location));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_many_qubits_example() {
        let c = cfg(2, 3, "|xxqi|qiqi|q...|");
        assert_eq!(classify(&c), ConfigClass::UndetectableIllegal(UndetectableReason::WrongQubitCount));
        let set = invariant_set(&c, DEFAULT_BFS_CAP);
        assert!(!set.capped);
        assert!(set.members.iter().all(|m| !classify(m).is_legal()));
    }

    #[test]
    fn endpoint_rules() {
        let c = cfg(2, 1, "qiq.");
        assert!(matches!(classify(&c), ConfigClass::DetectableIllegal(Witness::Endpoint { site: 1, .. })));
    }

    #[test]
    fn invariant_set_of_initial_contains_legal_line() {
        let c0 = initial_configuration_22();
        let set = invariant_set(&c0, DEFAULT_BFS_CAP);
        assert!(!set.capped);
        for c in legal_sequence(2, 2).unwrap() {
            assert!(set.contains(&c));
        }
        for m in &set.members {
            for nb in neighbors(m) {
                assert!(set.contains(&nb), "closure broken at {m} -> {nb}");
            }
        }
        let capped = invariant_set(&c0, 5);
        assert!(capped.capped);
    }

    fn initial_configuration_22() -> Configuration {
        super::super::initial_configuration(2, 2).unwrap()
    }

    #[test]
    fn key_neighbors_match_slow_neighbors() {
        let c = cfg(3, 2, "giqiq.|......");
        let graph = KeyGraph::new(3, 2);
        let mut fast = Vec::new();
        graph.for_each_neighbor(c.key(), |k| fast.push(decode(k, 3, 2)));
        fast.sort();
        fast.dedup();
        let mut slow = neighbors(&c);
        slow.sort();
        assert_eq!(fast, slow);
    }

    #[test]
    fn single_qubit_configuration_horizons() {
        // one qubit walks right through pusher creation, push, kill and 3d
        let c = cfg(2, 3, "xq..|....|....");
        assert!(classify(&c).is_undetectable());
        assert_eq!(detect_horizon(&c).unwrap(), Horizon::Steps(4));
        // at the chain end the forward rules run out before anything is detectable
        let c = cfg(2, 2, "xxxx|xq..");
        assert!(classify(&c).is_undetectable());
        assert!(matches!(detect_horizon(&c).unwrap(), Horizon::Unreachable { .. }));
        assert_eq!(exchange_horizon(&c, DEFAULT_BFS_CAP).unwrap(), Some(1));
    }

    #[test]
    fn horizon_rejects_legal_input() {
        let c = super::super::initial_configuration(3, 2).unwrap();
        assert!(matches!(detect_horizon(&c), Err(Error::Precondition(_))));
    }

    #[test]
    fn enumeration_contains_every_legal_configuration() {
        let all = enumerate_allowed(2, 2, &PairTable::standard()).unwrap();
        for c in legal_sequence(2, 2).unwrap() {
            assert!(all.binary_search(&c).is_ok());
        }
        assert!(all.iter().all(|c| !classify(c).is_detectable()));
        let _ = LocationType::A;
    }

    #[test]
    fn catalogue_shapes() {
        let cat = exchanges();
        assert_eq!(cat.iter().filter(|s| s.family == 3).count(), 3);
        let exchange_count: usize = cat.iter().map(|s| s.exchanges.len()).sum();
        assert_eq!(exchange_count, 1 + 3 + 10 + 2 + 5 + 2);
        for s in cat {
            for e in &s.exchanges {
                let before = e.from.iter().filter(|x| x.holds_qubit()).count();
                let after = e.to.iter().filter(|x| x.holds_qubit()).count();
                assert_eq!(before, after);
            }
        }
    }
}
