//! Executable checks tying the automaton, the Hamiltonian and the spectra
//! together. Every suite returns a [`Report`]; a suite passes iff all of its
//! checks pass.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::chain::{
    classify, classify_with, detect_horizon_with, enumerate_allowed, exchange_horizon, initial_configuration,
    location_type, shapes_at, step_count, Configuration, Horizon, PairTable, ProjectorRole, Rule, RuleId, RuleSet,
    Symbol, ALLOWED_PAIR_COUNT, FORBIDDEN_FAMILY_COUNT,
};
use crate::circuit::{GateKind, LayeredCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_h_pen_with, hamiltonian_for, Couplings, Family, HamiltonianSpec, LocalBasis};
use crate::spectra::{
    dense_eigh, expectation, history_state, lanczos, min_eigs_restricted, random_vector, restrict, walk_eigs_analytic,
    walk_matrix, FullOperator, LanczosOptions, RestrictedState, FULL_DIM_LIMIT, RESTRICT_LIMIT,
};

/// How a measured value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Equal,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    /// The property being checked, in words.
    pub claim: String,
    pub passed: bool,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub detail: String,
    pub runtime: Duration,
}

impl Check {
    fn new(id: &str, claim: &str, measured: f64, relation: Relation, bound: f64) -> Check {
        let passed = match relation {
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
            Relation::Equal => measured == bound,
        };
        Check {
            id: id.to_string(),
            claim: claim.to_string(),
            passed,
            measured,
            relation,
            bound,
            detail: String::new(),
            runtime: Duration::ZERO,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Check {
        self.detail = d.into();
        self
    }

    fn took(mut self, since: Instant) -> Check {
        self.runtime = since.elapsed();
        self
    }

    /// Forces a failure regardless of the comparison (for checks whose
    /// outcome depends on more than one number).
    fn require(mut self, ok: bool) -> Check {
        self.passed &= ok;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: impl Into<String>) -> Report {
        Report { suite: suite.into(), checks: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Human-readable form. Runtimes are included only on request so that
    /// reports stay byte-identical across runs.
    pub fn to_text(&self, timings: bool) -> String {
        let mut out = format!("suite {}: {}\n", self.suite, if self.passed() { "PASS" } else { "FAIL" });
        for c in &self.checks {
            let _ = write!(
                out,
                "  {} {}: measured {} {} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                fmt_num(c.measured),
                c.relation.symbol(),
                fmt_num(c.bound)
            );
            if timings {
                let _ = write!(out, " ({:.3} s)", c.runtime.as_secs_f64());
            }
            out.push('\n');
            let _ = writeln!(out, "      {}", c.claim);
            if !c.detail.is_empty() {
                let _ = writeln!(out, "      {}", c.detail);
            }
        }
        out
    }

    /// JSON lines: one summary record, then one record per check.
    pub fn to_json_lines(&self, timings: bool) -> String {
        let mut out = json!({"suite": self.suite, "passed": self.passed(), "checks": self.checks.len()}).to_string();
        out.push('\n');
        for c in &self.checks {
            let mut v = json!({
                "id": c.id,
                "claim": c.claim,
                "status": if c.passed { "pass" } else { "fail" },
                "measured": num_value(c.measured),
                "relation": c.relation.symbol(),
                "bound": num_value(c.bound),
                "detail": c.detail,
            });
            if timings {
                v["runtime_s"] = json!(c.runtime.as_secs_f64());
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.12e}")
    }
}

fn num_value(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// Rule table and pair table the suites run against. The standard model is
/// the construction itself; faults exist to show that the suites notice.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub rules: RuleSet,
    pub pairs: PairTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Rule 1 rewritten in the wrong direction.
    MutatedRule,
    /// The first forbidden pair family is declared allowed.
    DroppedPenFamily,
}

impl Model {
    pub fn standard() -> Model {
        Model { rules: RuleSet::standard(), pairs: PairTable::standard() }
    }

    pub fn with_fault(fault: Fault) -> Model {
        let mut m = Model::standard();
        match fault {
            Fault::MutatedRule => {
                let rules = m.rules.rules_mut();
                let k = rules.iter().position(|r| r.id == RuleId::R1).expect("rule 1 present");
                rules[k] = Rule::from_patterns(RuleId::R1, "q:g", "g:q", 0);
            }
            Fault::DroppedPenFamily => {
                let (x, y, t) = m.pairs.forbidden_families()[0];
                m.pairs.set_allowed(x, y, t, true);
            }
        }
        m
    }
}

/// Allowed-pair and forbidden-family counts, and the families covered by
/// the penalty terms.
pub fn check_pairs(model: &Model) -> Result<Report> {
    let mut r = Report::new("pairs");
    let t = Instant::now();
    r.push(
        Check::new(
            "pairs.allowed",
            "allowed (pair, location type) combinations",
            model.pairs.allowed_count() as f64,
            Relation::Equal,
            ALLOWED_PAIR_COUNT as f64,
        )
        .took(t),
    );
    let t = Instant::now();
    let fams = model.pairs.forbidden_families().len();
    r.push(
        Check::new(
            "pairs.forbidden",
            "forbidden families = 36 x 5 minus the allowed ones",
            fams as f64,
            Relation::Equal,
            FORBIDDEN_FAMILY_COUNT as f64,
        )
        .took(t),
    );
    let t = Instant::now();
    let pen = build_h_pen_with(3, 2, &model.pairs)?;
    let covered: BTreeSet<(Symbol, Symbol, char)> = pen
        .iter()
        .filter(|t| t.sites.len() == 2)
        .map(|t| {
            let k = t.entries[0].0 as usize;
            let (x, y) = (LocalBasis::decode(k / 8).0, LocalBasis::decode(k % 8).0);
            (x, y, t.location.map(|l| l.letter()).unwrap_or('-'))
        })
        .collect();
    r.push(
        Check::new(
            "pairs.pen_terms",
            "penalty terms cover every forbidden family",
            covered.len() as f64,
            Relation::Equal,
            FORBIDDEN_FAMILY_COUNT as f64,
        )
        .detail(format!("{} penalty terms on n = 3, R = 2", pen.len()))
        .took(t),
    );
    Ok(r)
}

/// Number of distinct places where a projector of the given role matches
/// `c` at a location its term is defined for.
pub fn active_spots(c: &Configuration, role: ProjectorRole) -> usize {
    let len = c.len();
    let mut spots = BTreeSet::new();
    for i in 1..len {
        for shape in shapes_at(c.location(i)) {
            for p in shape.projectors.iter().filter(|p| p.role == role) {
                let j = i as isize + p.offset;
                let hit = if j >= 1 && (j as usize) < len {
                    c.get(j as usize) == p.pair[0] && c.get(j as usize + 1) == p.pair[1]
                } else if j == 0 {
                    c.get(1) == p.pair[1]
                } else if j as usize == len {
                    c.get(len) == p.pair[0]
                } else {
                    false
                };
                if hit {
                    spots.insert(j);
                }
            }
        }
    }
    spots.len()
}

pub fn check_facts(n: usize, rounds: usize) -> Result<Report> {
    check_facts_with(&Model::standard(), n, rounds)
}

/// Along the legal sequence: one forward and one backward rule, one forward
/// and at most one backward projector match, and every exchange that does
/// not lead to a neighbor in the sequence produces a penalized pair.
pub fn check_facts_with(model: &Model, n: usize, rounds: usize) -> Result<Report> {
    let mut r = Report::new(format!("facts n={n} R={rounds}"));
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    if rounds < 1 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let t = Instant::now();
    let expected = step_count(n, rounds) + 1;
    let seq = match model.rules.legal_trace(n, rounds) {
        Ok(trace) => trace.into_iter().map(|(c, _)| c).collect::<Vec<_>>(),
        Err(e) => {
            r.push(
                Check::new("facts.sequence", "forward evolution yields the legal sequence", 0.0, Relation::Equal, expected as f64)
                    .require(false)
                    .detail(e.to_string())
                    .took(t),
            );
            return Ok(r);
        }
    };
    let templates_ok = seq.iter().enumerate().all(|(k, c)| classify(c) == crate::chain::ConfigClass::Legal { step: k });
    r.push(
        Check::new("facts.sequence", "forward evolution yields the legal sequence", seq.len() as f64, Relation::Equal, expected as f64)
            .require(templates_ok)
            .detail(format!("K = {}", seq.len().saturating_sub(1)))
            .took(t),
    );
    let k = seq.len() - 1;

    let t = Instant::now();
    let (mut fwd_bad, mut bwd_bad) = (0usize, 0usize);
    let (mut first_fwd, mut first_bwd) = (String::new(), String::new());
    for (step, c) in seq.iter().enumerate() {
        let fwd = model.rules.forward_rules(c);
        let fwd_ok = if step < k {
            fwd.len() == 1 && model.rules.apply(c, fwd[0]).ok().as_ref() == Some(&seq[step + 1])
        } else {
            fwd.is_empty()
        };
        let bwd = model.rules.backward_rules(c);
        let bwd_ok = if step > 0 {
            bwd.len() == 1 && model.rules.apply(c, bwd[0]).ok().as_ref() == Some(&seq[step - 1])
        } else {
            bwd.is_empty()
        };
        if !fwd_ok {
            fwd_bad += 1;
            if first_fwd.is_empty() {
                first_fwd = format!("step {step} {c}: {} forward rules", fwd.len());
            }
        }
        if !bwd_ok {
            bwd_bad += 1;
            if first_bwd.is_empty() {
                first_bwd = format!("step {step} {c}: {} backward rules", bwd.len());
            }
        }
    }
    r.push(
        Check::new("facts.forward_unique", "exactly one forward rule before the last step, none at it", fwd_bad as f64, Relation::Equal, 0.0)
            .detail(first_fwd)
            .took(t),
    );
    r.push(
        Check::new("facts.backward_unique", "exactly one backward rule after the first step, none at it", bwd_bad as f64, Relation::Equal, 0.0)
            .detail(first_bwd)
            .took(t),
    );

    let t = Instant::now();
    let (mut xy_bad, mut zw_bad) = (0usize, 0usize);
    let mut first = String::new();
    for (step, c) in seq.iter().enumerate() {
        let xy = active_spots(c, ProjectorRole::Forward);
        let zw = active_spots(c, ProjectorRole::Backward);
        if step < k && xy != 1 {
            xy_bad += 1;
            if first.is_empty() {
                first = format!("step {step} {c}: {xy} forward matches");
            }
        }
        if zw > 1 {
            zw_bad += 1;
            if first.is_empty() {
                first = format!("step {step} {c}: {zw} backward matches");
            }
        }
    }
    r.push(
        Check::new("facts.forward_spot", "one forward projector match per configuration before the last", xy_bad as f64, Relation::Equal, 0.0)
            .detail(first.clone())
            .took(t),
    );
    r.push(
        Check::new("facts.backward_spot", "at most one backward projector match per configuration", zw_bad as f64, Relation::Equal, 0.0)
            .detail(first)
            .took(t),
    );

    let t = Instant::now();
    let (mut stray, mut missing, mut tried) = (0usize, 0usize, 0usize);
    let mut first = String::new();
    for (step, c) in seq.iter().enumerate() {
        let mut reached: HashSet<Configuration> = HashSet::new();
        for i in 1..c.len() {
            let here = [c.get(i), c.get(i + 1)];
            for shape in shapes_at(c.location(i)) {
                for e in &shape.exchanges {
                    for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                        if here != a {
                            continue;
                        }
                        tried += 1;
                        let mut next = c.clone();
                        next.set(i, b[0]);
                        next.set(i + 1, b[1]);
                        let neighbor = (step < k && next == seq[step + 1]) || (step > 0 && next == seq[step - 1]);
                        if neighbor {
                            reached.insert(next);
                        } else if !classify_with(&next, &model.pairs).is_detectable() {
                            stray += 1;
                            if first.is_empty() {
                                first = format!("step {step}: exchange at pair {i} gives undetected {next}");
                            }
                        }
                    }
                }
            }
        }
        let want = usize::from(step < k) + usize::from(step > 0);
        if reached.len() != want {
            missing += 1;
            if first.is_empty() {
                first = format!("step {step} {c}: {} of {want} sequence neighbors reached", reached.len());
            }
        }
    }
    r.push(
        Check::new(
            "facts.exchanges",
            "every exchange off the sequence produces a penalized pair",
            (stray + missing) as f64,
            Relation::Equal,
            0.0,
        )
        .detail(if first.is_empty() { format!("{tried} exchanges tried") } else { first })
        .took(t),
    );
    Ok(r)
}

/// Energies of the history state of `circuit` on `witness`, per piece, with
/// unit couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEnergies {
    pub input: f64,
    pub prop: f64,
    pub pen: f64,
    pub output: f64,
    /// `<eta|H|eta>` with the couplings of [`hamiltonian_for`].
    pub total: f64,
    pub couplings: Couplings,
    /// Probability of output 0 from direct simulation.
    pub p0: f64,
    pub k: usize,
}

/// Probability that the last qubit reads 0 after the circuit acts on
/// `|0...0> (x) witness`.
pub fn reject_probability(circuit: &LayeredCircuit, witness: &[C64]) -> Result<f64> {
    let (n, m) = (circuit.n(), circuit.m());
    if witness.len() != 1 << m {
        return Err(Error::ShapeMismatch(format!("witness has length {}, expected 2^{m}", witness.len())));
    }
    let mut input = vec![C64::new(0.0, 0.0); 1 << n];
    input[..witness.len()].copy_from_slice(witness);
    let out = circuit.simulate(&input);
    let norm: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    Ok(out.iter().enumerate().filter(|(i, _)| i & 1 == 0).map(|(_, a)| a.norm_sqr()).sum::<f64>() / norm)
}

pub fn history_energies(circuit: &LayeredCircuit, witness: &[C64]) -> Result<HistoryEnergies> {
    let eta = history_state(circuit, witness)?;
    let norm = eta.norm().powi(2);
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero witness".into()));
    }
    let unit = hamiltonian_for(circuit, Some(Couplings::unit()))?;
    let full = hamiltonian_for(circuit, None)?;
    let e = |f: Family| -> Result<f64> { Ok(expectation(&unit.only(&[f]), &eta)? / norm) };
    Ok(HistoryEnergies {
        input: e(Family::In)?,
        prop: e(Family::Prop)?,
        pen: e(Family::Pen)?,
        output: e(Family::Out)?,
        total: expectation(&full, &eta)? / norm,
        couplings: full.couplings,
        p0: reject_probability(circuit, witness)?,
        k: full.k,
    })
}

/// The history state is annihilated by the input, penalty and propagation
/// pieces, and the output piece measures the rejection probability.
pub fn check_history(circuit: &LayeredCircuit, witness: &[C64]) -> Result<Report> {
    let t = Instant::now();
    let e = history_energies(circuit, witness)?;
    let mut r = Report::new(format!("history n={} R={}", circuit.n(), circuit.rounds()));
    r.push(Check::new("history.input", "<eta|H_in|eta> vanishes for zero ancillas", e.input.abs(), Relation::AtMost, 1e-12).took(t));
    r.push(Check::new("history.pen", "<eta|H_pen|eta> vanishes", e.pen.abs(), Relation::AtMost, 1e-12).took(t));
    r.push(Check::new("history.prop", "<eta|H_prop|eta> vanishes", e.prop.abs(), Relation::AtMost, 1e-12).took(t));
    let want = e.p0 / (e.k + 1) as f64;
    r.push(
        Check::new("history.output", "<eta|H_out|eta> = p0 / (K + 1)", (e.output - want).abs(), Relation::AtMost, 1e-12)
            .detail(format!("measured {:.15e}, p0 = {:.15e}, K = {}", e.output, e.p0, e.k))
            .took(t),
    );
    let c = e.couplings;
    let parts = c.j_in * e.input + c.j_prop * e.prop + c.j_pen * e.pen + e.output;
    let scale = 1.0 + c.j_in * e.input.abs() + c.j_prop * e.prop.abs() + c.j_pen * e.pen.abs() + e.output.abs();
    r.push(
        Check::new("history.decomposition", "weighted piece energies sum to the total", (e.total - parts).abs(), Relation::AtMost, 1e-12 * scale)
            .detail(format!("total {:.15e}", e.total))
            .took(t),
    );
    Ok(r)
}

/// The n = 2, m = 1, R = 2 pair used by the spectral probe: the accepting
/// circuit flips the ancilla and swaps it onto the output qubit; the
/// rejecting one only swaps.
pub fn probe_circuits() -> Result<(LayeredCircuit, LayeredCircuit)> {
    let mut x_left = [[C64::new(0.0, 0.0); 4]; 4];
    for (a, b) in [(0, 2), (1, 3), (2, 0), (3, 1)] {
        x_left[a][b] = C64::new(1.0, 0.0);
    }
    let swap_x = crate::circuit::mat4_mul(&GateKind::Swap.matrix(), &x_left);
    let accepting = LayeredCircuit::from_kinds(2, 1, &[vec![GateKind::I], vec![GateKind::Matrix(swap_x)]])?;
    let rejecting = LayeredCircuit::from_kinds(2, 1, &[vec![GateKind::I], vec![GateKind::Swap]])?;
    Ok((accepting, rejecting))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub seed: u64,
    /// Matrix-vector products of the full-space Lanczos run; 0 skips it.
    pub lanczos_steps: usize,
    /// Relative size of the random perturbation added to the Lanczos start.
    pub perturbation: f64,
    /// Largest invariant set restricted for the subspace checks.
    pub set_cap: usize,
    /// Random undetectable samples when the chain is too long to enumerate.
    pub samples: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { seed: 0, lanczos_steps: 8, perturbation: 1e-9, set_cap: 20_000, samples: 100 }
    }
}

/// Spectral facts about one circuit's Hamiltonian with [`hamiltonian_for`]
/// couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProbe {
    pub couplings: Couplings,
    /// Exact lowest eigenvalue over the full space, from its block structure.
    pub lambda_min: f64,
    pub blocks: usize,
    pub largest_block: usize,
    /// Lowest Ritz value of a full-space Lanczos run started near the
    /// history state (an upper bound on `lambda_min`).
    pub lanczos: Option<f64>,
    pub runtime: Duration,
}

pub fn spectral_probe(circuit: &LayeredCircuit, opts: &ProbeOptions) -> Result<SpectralProbe> {
    let t = Instant::now();
    let h = hamiltonian_for(circuit, None)?;
    let op = FullOperator::new(&h)?;
    let bs = op.block_spectrum(1, 1.0)?;
    let lambda_min = bs.lower_bound();
    let lanczos_value = if opts.lanczos_steps > 0 {
        let witness = {
            let mut w = vec![C64::new(0.0, 0.0); 1 << circuit.m()];
            w[0] = C64::new(1.0, 0.0);
            w
        };
        let mut start = history_state(circuit, &witness)?.to_full(circuit.n(), circuit.rounds())?.amps;
        let noise = random_vector(start.len(), opts.seed);
        let nn = noise.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = opts.perturbation / nn;
        start.iter_mut().zip(&noise).for_each(|(a, b)| *a += b * s);
        drop(noise);
        let lo = LanczosOptions { k: 1, tol: 0.0, max_iter: opts.lanczos_steps, max_basis: 4, seed: opts.seed, start: Some(start) };
        Some(lanczos(&op, &lo)?.values[0])
    } else {
        None
    };
    Ok(SpectralProbe {
        couplings: h.couplings,
        lambda_min,
        blocks: bs.blocks,
        largest_block: bs.largest_solved,
        lanczos: lanczos_value,
        runtime: t.elapsed(),
    })
}

/// Lowest eigenvalue of `<eta_a|H_out|eta_b>` over witness basis states:
/// the output energy on the span of valid history states.
pub fn output_on_history_span(circuit: &LayeredCircuit) -> Result<f64> {
    let m = circuit.m();
    let h_out = hamiltonian_for(circuit, Some(Couplings::unit()))?.only(&[Family::Out]);
    let etas: Vec<RestrictedState> = (0..1usize << m)
        .map(|w| {
            let mut v = vec![C64::new(0.0, 0.0); 1 << m];
            v[w] = C64::new(1.0, 0.0);
            history_state(circuit, &v)
        })
        .collect::<Result<_>>()?;
    let applied: Vec<RestrictedState> = etas.iter().map(|e| crate::spectra::apply_restricted(&h_out, e)).collect();
    let d = etas.len();
    let mat = DMatrix::from_fn(d, d, |a, b| etas[a].inner(&applied[b]));
    Ok(dense_eigh(&mat).0[0])
}

/// Lowest eigenvalue of `h` restricted to the invariant set of `c`, or
/// `None` if the set is capped or too large.
fn restricted_min(h: &HamiltonianSpec, c: &Configuration, cap: usize) -> Result<Option<(f64, usize, Vec<Configuration>)>> {
    let set = crate::chain::invariant_set(c, cap);
    if set.capped {
        return Ok(None);
    }
    let dim: usize = set.members.iter().map(|m| 1usize << m.qubit_count()).sum();
    if dim > RESTRICT_LIMIT {
        return Ok(None);
    }
    let rest = restrict(h, &set.members)?;
    let e = min_eigs_restricted(&rest, &LanczosOptions { k: 1, tol: 1e-12, ..Default::default() })?;
    Ok(Some((e.values[0], dim, set.members)))
}

fn undetectable_samples(n: usize, rounds: usize, samples: usize, seed: u64) -> Result<Vec<Configuration>> {
    if 2 * n * rounds <= 12 {
        let all = enumerate_allowed(n, rounds, &PairTable::standard())?;
        return Ok(all.into_iter().filter(|c| classify(c).is_undetectable()).collect());
    }
    // random depth-first walks through the allowed pairs
    let pairs = PairTable::standard();
    let len = 2 * n * rounds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..samples * 200 {
        if out.len() >= samples {
            break;
        }
        let mut sites: Vec<Symbol> = Vec::with_capacity(len);
        let mut options: Vec<Vec<Symbol>> = Vec::new();
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > 100 * len {
                break;
            }
            if sites.len() == len {
                break;
            }
            if options.len() == sites.len() {
                let mut choice: Vec<Symbol> = Symbol::ALL
                    .into_iter()
                    .filter(|&s| match sites.last() {
                        None => matches!(s, Symbol::Dead | Symbol::Gate),
                        Some(&prev) => pairs.allowed(prev, s, location_type(sites.len(), n, rounds).expect("pair")),
                    })
                    .filter(|&s| sites.len() + 1 < len || matches!(s, Symbol::Gate | Symbol::Blank))
                    .collect();
                choice.shuffle(&mut rng);
                options.push(choice);
            }
            match options.last_mut().and_then(|o| o.pop()) {
                Some(s) => sites.push(s),
                None => {
                    options.pop();
                    if sites.pop().is_none() {
                        break;
                    }
                }
            }
        }
        if sites.len() != len {
            continue;
        }
        let c = Configuration::new(n, rounds, sites)?;
        if classify(&c).is_undetectable() && seen.insert(c.clone()) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Full-space lowest eigenvalues of an accepting and a rejecting circuit of
/// the same shape, plus subspace checks on the rejecting one.
pub fn soundness_probe(accepting: &LayeredCircuit, rejecting: &LayeredCircuit, opts: &ProbeOptions) -> Result<Report> {
    if (accepting.n(), accepting.m(), accepting.rounds()) != (rejecting.n(), rejecting.m(), rejecting.rounds()) {
        return Err(Error::ShapeMismatch("probe circuits differ in shape".into()));
    }
    let (n, rounds) = (rejecting.n(), rejecting.rounds());
    let mut r = Report::new(format!("soundness n={n} R={rounds}"));
    let full_ok = 3 * 2 * n * rounds <= FULL_DIM_LIMIT.trailing_zeros() as usize;
    let (acc, rej) = if full_ok {
        (Some(spectral_probe(accepting, opts)?), Some(spectral_probe(rejecting, opts)?))
    } else {
        (None, None)
    };
    if let (Some(acc), Some(rej)) = (&acc, &rej) {
        let c = acc.couplings;
        let couplings = format!("j_in = {}, j_prop = {}, j_pen = {}", c.j_in, c.j_prop, c.j_pen);
        r.push(Check {
            runtime: acc.runtime,
            ..Check::new("soundness.accepting", "accepting circuit: lowest full-space eigenvalue <= 1e-8", acc.lambda_min, Relation::AtMost, 1e-8)
                .detail(format!("exact over {} blocks (largest solved {}); {couplings}", acc.blocks, acc.largest_block))
        });
        if let Some(l) = acc.lanczos {
            r.push(
                Check::new("soundness.accepting_lanczos", "accepting circuit: full-space Lanczos Ritz value <= 1e-8", l, Relation::AtMost, 1e-8)
                    .detail(format!("{} matvecs from the perturbed history state", opts.lanczos_steps)),
            );
        }
        let margin = 1e3 * acc.lambda_min.abs();
        r.push(Check {
            runtime: rej.runtime,
            ..Check::new(
                "soundness.rejecting",
                "rejecting circuit: lowest full-space eigenvalue positive, >= 1e3 x |accepting estimate|",
                rej.lambda_min,
                Relation::AtLeast,
                margin,
            )
            .require(rej.lambda_min > 0.0)
            .detail(format!("exact over {} blocks (largest solved {})", rej.blocks, rej.largest_block))
        });
        if let Some(l) = rej.lanczos {
            let tol = 1e-9 * l.abs().max(1.0);
            r.push(
                Check::new("soundness.rejecting_lanczos", "rejecting circuit: exact lowest eigenvalue <= Lanczos Ritz value", rej.lambda_min, Relation::AtMost, l + tol)
                    .detail(format!("Ritz value {l:.12e}")),
            );
        }
    }

    let t = Instant::now();
    let k = step_count(n, rounds);
    let lam = output_on_history_span(rejecting)?;
    r.push(
        Check::new("soundness.history_span", "rejecting circuit: H_out on valid history states has lowest eigenvalue 1/(K+1)", (lam - 1.0 / (k + 1) as f64).abs(), Relation::AtMost, 1e-12)
            .detail(format!("lowest {lam:.15e}, 1/(K+1) = {:.15e}", 1.0 / (k + 1) as f64))
            .took(t),
    );

    let t = Instant::now();
    let h = hamiltonian_for(rejecting, None)?;
    let c0 = initial_configuration(n, rounds)?;
    match restricted_min(&h, &c0, opts.set_cap)? {
        Some((v, dim, members)) => {
            let floor = rej.as_ref().map(|p| p.lambda_min).unwrap_or(f64::NEG_INFINITY);
            let tol = 1e-9 * h.couplings.j_pen;
            r.push(
                Check::new(
                    "soundness.type1",
                    "restriction to the invariant set of C_0 is bounded below by the full spectrum",
                    v,
                    Relation::AtLeast,
                    floor - tol,
                )
                .detail(format!("{} configurations, dimension {dim}", members.len()))
                .took(t),
            );
        }
        None => r.push(
            Check::new("soundness.type1", "restriction to the invariant set of C_0", f64::NAN, Relation::AtLeast, 0.0)
                .require(false)
                .detail(format!("invariant set exceeds {} configurations", opts.set_cap))
                .took(t),
        ),
    }

    let t = Instant::now();
    let h3 = h.only(&[Family::Pen, Family::Prop]);
    let mut done: HashSet<Configuration> = HashSet::new();
    let (mut sets, mut skipped, mut failures) = (0usize, 0usize, 0usize);
    let mut worst: Option<(f64, f64, usize)> = None;
    for c in undetectable_samples(n, rounds, opts.samples, opts.seed)? {
        if done.contains(&c) {
            continue;
        }
        match restricted_min(&h3, &c, opts.set_cap)? {
            Some((v, _, members)) => {
                let kp = members.iter().filter(|m| classify(m).is_undetectable()).count().saturating_sub(1);
                let bound = h.couplings.j_prop * (1.0 - (std::f64::consts::PI / (2 * kp + 3) as f64).cos()) / 2.0;
                sets += 1;
                if v < bound {
                    failures += 1;
                }
                if worst.map_or(true, |w| v - bound < w.0 - w.1) {
                    worst = Some((v, bound, kp));
                }
                done.extend(members);
            }
            None => {
                skipped += 1;
                done.insert(c);
            }
        }
    }
    let (v, bound, kp) = worst.unwrap_or((f64::INFINITY, 0.0, 0));
    r.push(
        Check::new(
            "soundness.type3",
            "J_pen H_pen + J_prop H_prop on undetectable invariant sets >= J_prop (1 - cos(pi/(2K'+3)))/2",
            v,
            Relation::AtLeast,
            bound,
        )
        .require(failures == 0 && skipped == 0)
        .detail(format!("{sets} sets, {failures} below their bound, {skipped} skipped; worst set K' = {kp}"))
        .took(t),
    );
    Ok(r)
}

/// Closed forms of the three walk matrices against dense diagonalization,
/// their eigenvectors, and the gap inequalities.
pub fn appendix_suite(lmax: usize) -> Result<Report> {
    use std::f64::consts::PI;
    let mut r = Report::new(format!("walk spectra L<={lmax}"));
    if lmax == 0 {
        return Err(Error::InvalidArgument("Lmax must be at least 1".into()));
    }
    type VecForm = fn(usize, usize, usize) -> f64;
    let cases: [(f64, f64, &str, VecForm); 3] = [
        (0.5, 0.5, "half_half", |m, j, l| (m as f64 * PI * (j as f64 + 0.5) / (l + 1) as f64).cos()),
        (1.0, 1.0, "one_one", |m, j, l| ((m + 1) as f64 * PI * (j + 1) as f64 / (l + 2) as f64).sin()),
        (1.0, 0.5, "one_half", |m, j, l| ((2 * m + 1) as f64 * PI * (j + 1) as f64 / (2 * l + 3) as f64).sin()),
    ];
    for (f, g, name, vec_form) in cases {
        let t = Instant::now();
        let (mut eig_err, mut vec_err) = (0.0f64, 0.0f64);
        for l in 1..=lmax {
            let w = walk_matrix(f, g, l)?;
            let num = w.eigenvalues();
            let ana = walk_eigs_analytic(f, g, l)?;
            eig_err = num.iter().zip(&ana).map(|(a, b)| (a - b).abs()).fold(eig_err, f64::max);
            let m = w.dense();
            // closed-form eigenvalues in index order, not sorted
            for mi in 0..=l {
                let lam = match name {
                    "half_half" => 1.0 - (mi as f64 * PI / (l + 1) as f64).cos(),
                    "one_one" => 1.0 - ((mi + 1) as f64 * PI / (l + 2) as f64).cos(),
                    _ => 1.0 - ((2 * mi + 1) as f64 * PI / (2 * l + 3) as f64).cos(),
                };
                let x = nalgebra::DVector::from_fn(l + 1, |j, _| vec_form(mi, j, l));
                let res = (&m * &x - &x * lam).norm() / x.norm();
                vec_err = vec_err.max(res);
            }
        }
        r.push(
            Check::new(&format!("walk.{name}.eigenvalues"), &format!("({f}, {g}) closed-form eigenvalues match dense diagonalization"), eig_err, Relation::AtMost, 1e-10)
                .took(t),
        );
        r.push(
            Check::new(&format!("walk.{name}.eigenvectors"), &format!("({f}, {g}) closed-form eigenvectors have residual <= 1e-10"), vec_err, Relation::AtMost, 1e-10)
                .took(t),
        );
    }

    let t = Instant::now();
    let mut zero = 0.0f64;
    for l in 1..=lmax {
        let m = walk_matrix(0.5, 0.5, l)?.dense();
        let x = nalgebra::DVector::from_element(l + 1, 1.0);
        zero = zero.max((&m * &x).amax());
    }
    r.push(Check::new("walk.zero_mode", "the constant vector is an exact zero mode of (1/2, 1/2)", zero, Relation::Equal, 0.0).took(t));

    // The (1, 1) case as sometimes written: eigenvalue denominator L + 1 and
    // a cosine eigenvector. Numerics decide against both.
    let t = Instant::now();
    let (mut written_eig, mut written_vec) = (f64::INFINITY, f64::INFINITY);
    for l in 1..=lmax {
        let w = walk_matrix(1.0, 1.0, l)?;
        let mut alt: Vec<f64> = (0..=l).map(|m| 1.0 - ((m + 1) as f64 * PI / (l + 1) as f64).cos()).collect();
        alt.sort_by(f64::total_cmp);
        let d = w.eigenvalues().iter().zip(&alt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        written_eig = written_eig.min(d);
        let m = w.dense();
        let x = nalgebra::DVector::from_fn(l + 1, |j, _| (PI * (j + 1) as f64 / (l + 2) as f64).cos());
        let lam = 1.0 - (PI / (l + 2) as f64).cos();
        written_vec = written_vec.min((&m * &x - &x * lam).norm() / x.norm());
    }
    r.push(
        Check::new("walk.one_one.denominator", "(1, 1): an L+1 eigenvalue denominator disagrees with the matrix for every L", written_eig, Relation::AtLeast, 1e-6)
            .detail(format!("smallest cosine-eigenvector residual {written_vec:.3e}; the L+2 sine form is the one that holds"))
            .require(written_vec >= 1e-6)
            .took(t),
    );

    let t = Instant::now();
    let mut lowest = 0.0f64;
    for l in 1..=lmax {
        let e = walk_matrix(1.0, 0.5, l)?.eigenvalues()[0];
        lowest = lowest.max((e - (1.0 - (PI / (2 * l + 3) as f64).cos())).abs());
    }
    r.push(Check::new("walk.one_half.lowest", "lowest eigenvalue of (1, 1/2) equals 1 - cos(pi/(2L+3))", lowest, Relation::AtMost, 1e-10).took(t));

    let t = Instant::now();
    let mut worst = f64::INFINITY;
    for kk in 1..=200usize {
        let e = walk_matrix(0.5, 0.5, kk)?.eigenvalues();
        worst = worst.min(e[1] * 2.0 * ((kk + 1) as f64).powi(2));
    }
    r.push(
        Check::new("walk.gap", "second smallest eigenvalue of (1/2, 1/2) on K+1 sites >= 1/(2(K+1)^2), K <= 200", worst, Relation::AtLeast, 1.0)
            .detail("measured is the smallest ratio eigenvalue * 2(K+1)^2")
            .took(t),
    );

    // 1 - cos x - (x^2/2 - x^4/24) as the tail of the cosine series; summing
    // the tail directly avoids cancellation for small x.
    let t = Instant::now();
    let mut worst_tail = f64::INFINITY;
    let mut worst_at = 0usize;
    for l in 1..=10_000usize {
        let x = PI / (l + 1) as f64;
        let tail = cosine_tail(x);
        if tail / x.powi(6) < worst_tail {
            worst_tail = tail / x.powi(6);
            worst_at = l;
        }
        if l <= 30 {
            let direct = (1.0 - x.cos()) - (x * x / 2.0 - x.powi(4) / 24.0);
            if (direct - tail).abs() > 1e-15 {
                worst_tail = f64::NEG_INFINITY;
            }
        }
    }
    r.push(
        Check::new(
            "walk.series_bound",
            "1 - cos(pi/(L+1)) > (pi^2/2 - pi^4/(24 (L+1)^2)) / (L+1)^2 for L <= 10000",
            worst_tail,
            Relation::AtLeast,
            0.0,
        )
        .require(worst_tail > 0.0)
        .detail(format!("measured is the smallest tail / x^6 (at L = {worst_at}); positive means strict"))
        .took(t),
    );
    Ok(r)
}

/// `sum_{k>=3} (-1)^(k+1) x^(2k) / (2k)!`, the part of `1 - cos x` beyond
/// the quartic term.
pub fn cosine_tail(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x2 * x2 * x2 / 720.0;
    let mut sum = 0.0f64;
    let mut k = 3usize;
    while term.abs() > 0.0 && term.abs() > 1e-18 * sum.abs() {
        sum += term;
        term *= -x2 / ((2 * k + 1) * (2 * k + 2)) as f64;
        k += 1;
    }
    sum
}

/// Forward-rule and exchange-graph distances from every undetectable
/// configuration to a penalized one, for every shape with `2nR <= max_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonStats {
    pub n: usize,
    pub rounds: usize,
    pub undetectable: usize,
    /// Configurations whose forward evolution halts undetected.
    pub forward_unreachable: usize,
    pub forward_max: usize,
    pub exchange_unreachable: usize,
    pub exchange_max: usize,
}

pub fn horizon_stats(n: usize, rounds: usize, cap: usize) -> Result<HorizonStats> {
    use rayon::prelude::*;
    let all = enumerate_allowed(n, rounds, &PairTable::standard())?;
    let und: Vec<Configuration> = all.into_iter().filter(|c| classify(c).is_undetectable()).collect();
    let rules = RuleSet::standard();
    let results: Vec<(Horizon, Option<usize>)> = und
        .par_iter()
        .map(|c| Ok((detect_horizon_with(&rules, c, false)?, exchange_horizon(c, cap)?)))
        .collect::<Result<_>>()?;
    let mut s = HorizonStats {
        n,
        rounds,
        undetectable: und.len(),
        forward_unreachable: 0,
        forward_max: 0,
        exchange_unreachable: 0,
        exchange_max: 0,
    };
    for (fwd, ex) in results {
        match fwd {
            Horizon::Steps(k) => s.forward_max = s.forward_max.max(k),
            Horizon::Unreachable { .. } => s.forward_unreachable += 1,
        }
        match ex {
            Some(k) => s.exchange_max = s.exchange_max.max(k),
            None => s.exchange_unreachable += 1,
        }
    }
    Ok(s)
}

pub fn horizon_suite(max_len: usize, cap: usize) -> Result<Report> {
    if max_len < 4 {
        return Err(Error::InvalidArgument(format!("no chain fits length {max_len}; the shortest has 4 sites")));
    }
    let mut r = Report::new(format!("horizons 2nR<={max_len}"));
    let t = Instant::now();
    let mut stats = Vec::new();
    for n in 2..=max_len / 2 {
        for rounds in 1..=max_len / (2 * n) {
            stats.push(horizon_stats(n, rounds, cap)?);
        }
    }
    let total: usize = stats.iter().map(|s| s.undetectable).sum();
    let unreachable: usize = stats.iter().map(|s| s.forward_unreachable).sum();
    let per_shape: Vec<String> = stats
        .iter()
        .map(|s| format!("({},{}) {}/{} max {}", s.n, s.rounds, s.forward_unreachable, s.undetectable, s.forward_max))
        .collect();
    r.push(
        Check::new("horizon.forward_finite", "forward rules reach a penalized configuration from every undetectable one", unreachable as f64, Relation::Equal, 0.0)
            .detail(format!("{total} undetectable; unreachable per shape: {}", per_shape.join(", ")))
            .took(t),
    );
    let ratio = stats
        .iter()
        .map(|s| s.forward_max as f64 / ((2 * s.n * s.rounds) as f64).powi(3))
        .fold(0.0, f64::max);
    r.push(
        Check::new("horizon.forward_bound", "largest finite forward horizon / (2nR)^3", ratio, Relation::AtMost, 1.0)
            .detail(format!("largest finite horizon {}", stats.iter().map(|s| s.forward_max).max().unwrap_or(0)))
            .took(t),
    );
    let ex_unreachable: usize = stats.iter().map(|s| s.exchange_unreachable).sum();
    let ex_max = stats.iter().map(|s| s.exchange_max).max().unwrap_or(0);
    let ex_ratio = stats
        .iter()
        .map(|s| s.exchange_max as f64 / ((2 * s.n * s.rounds) as f64).powi(3))
        .fold(0.0, f64::max);
    r.push(
        Check::new("horizon.exchange_finite", "the exchange graph links every undetectable configuration to a penalized one", ex_unreachable as f64, Relation::Equal, 0.0)
            .detail(format!("largest exchange distance {ex_max}, / (2nR)^3 = {ex_ratio:.3e}"))
            .took(t),
    );

    let t = Instant::now();
    let example = Configuration::parse(2, 3, "|xxqi|qiqi|q...|")?;
    let h = detect_horizon_with(&RuleSet::standard(), &example, false)?;
    let e = exchange_horizon(&example, cap)?;
    let steps = match h {
        Horizon::Steps(k) => k as f64,
        Horizon::Unreachable { .. } => f64::INFINITY,
    };
    r.push(
        Check::new("horizon.too_many_qubits", "a chain carrying too many qubits reaches a penalized configuration", steps, Relation::AtMost, (12f64).powi(3))
            .detail(format!("{example}; exchange distance {e:?}"))
            .took(t),
    );

    let t = Instant::now();
    let legal = initial_configuration(2, 2)?;
    let refused = matches!(detect_horizon_with(&RuleSet::standard(), &legal, false), Err(Error::Precondition(_)));
    r.push(
        Check::new("horizon.legal_input", "a legal configuration is refused as input", f64::from(u8::from(refused)), Relation::Equal, 1.0).took(t),
    );
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_tail_matches_direct_for_moderate_x() {
        for &x in &[0.5, 1.0, 1.5, std::f64::consts::PI / 2.0] {
            let direct = (1.0 - f64::cos(x)) - (x * x / 2.0 - x.powi(4) / 24.0);
            assert!((cosine_tail(x) - direct).abs() < 1e-15, "x = {x}");
        }
        assert!(cosine_tail(1e-4) > 0.0);
    }

    #[test]
    fn report_text_is_stable() {
        let mut r = Report::new("demo");
        r.push(Check::new("a", "claim a", 0.0, Relation::Equal, 0.0));
        r.push(Check::new("b", "claim b", 2.5, Relation::AtMost, 1.0));
        assert!(!r.passed());
        let text = r.to_text(false);
        assert!(text.starts_with("suite demo: FAIL\n"));
        assert_eq!(text, r.to_text(false));
        assert_eq!(r.to_json_lines(false).lines().count(), 3);
    }

    #[test]
    fn faults_change_the_model() {
        assert_ne!(Model::with_fault(Fault::MutatedRule), Model::standard());
        let m = Model::with_fault(Fault::DroppedPenFamily);
        assert_eq!(m.pairs.allowed_count(), ALLOWED_PAIR_COUNT + 1);
    }
}
