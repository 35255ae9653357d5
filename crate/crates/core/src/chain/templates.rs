//! Closed-form round templates for the legal sequence.
//!
//! One round of the computation acts on two neighboring blocks `r` and
//! `r + 1`; everything to the left of block `r` is `x` and everything to the
//! right of block `r + 1` is blank. The templates below describe the `4n`
//! sites of those two blocks for every step of a round, written out from the
//! round structure (gate sweep, pusher sweep, `n - 1` shift phases) without
//! running the rule engine, so they serve as an independent membership test.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::{Configuration, Symbol};

fn rep(s: &str, k: usize) -> String {
    s.repeat(k)
}

/// Windows of `4n` symbols for the `3n^2 + 2n - 1` configurations of one
/// full round, in order (the following round's first configuration excluded).
pub fn round_templates(n: usize) -> Vec<String> {
    assert!(n >= 2);
    let blanks = |k: usize| rep("..", k);
    let mut out = Vec::new();
    let tail = blanks(n);

    // gate sweep
    out.push(format!("gi{}q.{tail}", rep("qi", n - 2)));
    out.push(format!("xg{}q.{tail}", rep("qi", n - 2)));
    for i in 0..n.saturating_sub(2) {
        out.push(format!("xq{}gi{}q.{tail}", rep("iq", i), rep("qi", n - i - 3)));
        out.push(format!("xq{}ig{}q.{tail}", rep("iq", i), rep("qi", n - i - 3)));
    }
    out.push(format!("xq{}g.{tail}", rep("iq", n - 2)));
    out.push(format!("xq{}ig{tail}", rep("iq", n - 2)));
    // pusher created at the block boundary
    out.push(format!("xq{}<.{}", rep("iq", n - 1), blanks(n - 1)));

    for j in 0..n - 1 {
        let right = blanks(n - j - 1);
        for k in 0..n - 1 {
            out.push(format!("{}xq{}i<{}q.{right}", rep("xx", j), rep("iq", n - k - 2), rep("qi", k)));
            out.push(format!("{}xq{}<i{}q.{right}", rep("xx", j), rep("iq", n - k - 2), rep("qi", k)));
        }
        out.push(format!("{}x<{}q.{right}", rep("xx", j), rep("qi", n - 1)));
        out.push(format!("{}xx{}q.{right}", rep("xx", j), rep("qi", n - 1)));
        for l in 0..n.saturating_sub(2) {
            out.push(format!("{}xq{}{}q.{right}", rep("xx", j + 1), rep("iq", l), rep("qi", n - l - 2)));
        }
        out.push(format!("{}xq{}q.{right}", rep("xx", j + 1), rep("iq", n - 2)));
        out.push(format!("{}xq{}iq{right}", rep("xx", j + 1), rep("iq", n - 2)));
        out.push(format!("{}xq{}iq<.{}", rep("xx", j + 1), rep("iq", n - 2), blanks(n - j - 2)));
    }
    // last push sweep inside block r+1, kill at the boundary
    for i in 0..n - 1 {
        out.push(format!("{}xq{}i<{}q.", rep("xx", n - 1), rep("iq", n - i - 2), rep("qi", i)));
        out.push(format!("{}xq{}<i{}q.", rep("xx", n - 1), rep("iq", n - i - 2), rep("qi", i)));
    }
    out.push(format!("{}x<{}q.", rep("xx", n - 1), rep("qi", n - 1)));
    out
}

fn to_symbols(s: &str) -> Vec<Symbol> {
    s.chars().map(|c| Symbol::from_char(c).expect("template symbol")).collect()
}

/// Template lookup tables for one `n`: full-round windows and the
/// single-block windows of the final gate sweep.
pub struct LegalIndex {
    n: usize,
    full: HashMap<Vec<Symbol>, usize>,
    last: HashMap<Vec<Symbol>, usize>,
    round_len: usize,
}

impl LegalIndex {
    pub fn new(n: usize) -> Self {
        let templates = round_templates(n);
        let round_len = templates.len();
        let mut full = HashMap::new();
        let mut last = HashMap::new();
        for (s, t) in templates.iter().enumerate() {
            let sym = to_symbols(t);
            debug_assert_eq!(sym.len(), 4 * n);
            full.insert(sym.clone(), s);
            // the final round stops once the gate particle reaches the end
            // of its block
            if s < 2 * n && sym[2 * n..].iter().all(|&x| x == Symbol::Blank) {
                last.insert(sym[..2 * n].to_vec(), s);
            }
        }
        LegalIndex { n, full, last, round_len }
    }

    /// Steps in one full round.
    pub fn round_len(&self) -> usize {
        self.round_len
    }

    /// Time step `t` of `c` in the legal sequence, if `c` is legal.
    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        let n = self.n;
        if c.n() != n {
            return None;
        }
        let rounds = c.rounds();
        let block = 2 * n;
        let lead = c.sites().iter().take_while(|&&s| s == Symbol::Dead).count();
        let r = lead / block + 1;
        if r > rounds {
            return None;
        }
        let start = block * (r - 1);
        let base = (r - 1) * self.round_len;
        if r < rounds {
            let window = &c.sites()[start..start + 2 * block];
            let s = *self.full.get(window)?;
            if c.sites()[start + 2 * block..].iter().all(|&x| x == Symbol::Blank) {
                return Some(base + s);
            }
            None
        } else {
            self.last.get(&c.sites()[start..]).map(|s| base + s)
        }
    }
}

/// Legal time step of `c` via the round templates.
pub fn legal_index(c: &Configuration) -> Option<usize> {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static LegalIndex>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let index: &'static LegalIndex = {
        let mut guard = cache.lock().expect("template cache poisoned");
        *guard.entry(c.n()).or_insert_with(|| Box::leak(Box::new(LegalIndex::new(c.n()))))
    };
    index.index_of(c)
}

#[cfg(test)]
mod tests {
    use super::super::{legal_sequence, step_count};
    use super::*;

    #[test]
    fn round_length_formula() {
        for n in 2..8 {
            assert_eq!(round_templates(n).len(), 3 * n * n + 2 * n - 1, "n={n}");
            assert!(round_templates(n).iter().all(|t| t.len() == 4 * n));
        }
    }

    #[test]
    fn templates_agree_with_rule_engine() {
        for n in 2..6 {
            for r in 1..5 {
                let seq = legal_sequence(n, r).unwrap();
                assert_eq!(seq.len(), step_count(n, r) + 1);
                for (t, c) in seq.iter().enumerate() {
                    assert_eq!(legal_index(c), Some(t), "n={n} R={r} {c}");
                }
            }
        }
    }

    #[test]
    fn rejects_shifted_and_overfull() {
        let c = Configuration::parse(2, 2, "xxqi|qi..").unwrap();
        assert_eq!(legal_index(&c), None);
        let c = Configuration::parse(3, 2, "xxqiqi|qiq...").unwrap();
        assert_eq!(legal_index(&c), None);
    }
}
