//! Acceptance run: one line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` cannot be met by this construction as
//! specified; they print FAIL with the measured values. The run exits nonzero
//! if any other criterion fails, or if a known failure starts passing.

use std::process::Command;
use std::time::{Duration, Instant};

use hamline::chain::{legal_sequence, Configuration, PairTable, ALLOWED_PAIR_COUNT, FORBIDDEN_FAMILY_COUNT};
use hamline::circuit::{GateKind, LayeredCircuit};
use hamline::hamiltonian::{hamiltonian_for, Couplings, Family, HamiltonianSpec};
use hamline::spectra::{apply_restricted, restrict, rotate_out_gates, walk_matrix, RestrictedState};
use hamline::verify::{self, Fault, Model, ProbeOptions, Report};
use num_complex::Complex64 as C64;

const KNOWN_FAILURES: [u8; 4] = [1, 5, 8, 9];
const GOLDEN: &str = include_str!("data/sequence_n3_r2.txt");

struct Outcome {
    id: u8,
    name: &'static str,
    passed: bool,
    summary: String,
    runtime: Duration,
}

fn fmt_checks(r: &Report, ids: &[&str]) -> String {
    ids.iter()
        .filter_map(|id| r.get(id))
        .map(|c| format!("{} {} ({})", c.id, if c.passed { "pass" } else { "fail" }, fmt_num(c.measured)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{v}")
    } else {
        format!("{v:.6e}")
    }
}

fn legal_sequence_exactness() -> (bool, String) {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_hamline")).args(["sequence", "--n", "3", "--R", "2"]).output().unwrap();
    let elapsed = t.elapsed();
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let golden: Vec<&str> = GOLDEN.lines().collect();
    // the transcription's last line carries no annotation
    let mismatches = golden.iter().zip(&lines).filter(|(g, l)| !l.starts_with(**g)).count() + golden.len().saturating_sub(lines.len());
    let count_ok = lines.len() == 39;
    let passed = out.status.success() && count_ok && mismatches == 0 && elapsed < Duration::from_secs(1);
    (
        passed,
        format!(
            "{} configurations (need 39), first round {}/{} lines match, {:.3} s",
            lines.len(),
            golden.len() - mismatches,
            golden.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn pair_census() -> (bool, String) {
    let table = PairTable::standard();
    let allowed = table.allowed_count();
    let forbidden = table.forbidden_families().len();
    let report = verify::check_pairs(&Model::standard()).unwrap();
    let passed = allowed == 56 && forbidden == 124 && allowed == ALLOWED_PAIR_COUNT && forbidden == FORBIDDEN_FAMILY_COUNT && report.passed();
    (passed, format!("allowed {allowed}, forbidden families {forbidden}, {} penalty families built", report.get("pairs.pen_terms").unwrap().measured))
}

fn facts_suite() -> (bool, String) {
    let t = Instant::now();
    let mut bad = Vec::new();
    for n in 2..=4 {
        for rounds in 2..=3 {
            let r = verify::check_facts(n, rounds).unwrap();
            if !r.passed() {
                bad.push(format!("({n},{rounds})"));
            }
        }
    }
    let elapsed = t.elapsed();
    let passed = bad.is_empty() && elapsed < Duration::from_secs(30);
    (passed, format!("6 shapes, failing {:?}, {:.2} s", bad, elapsed.as_secs_f64()))
}

/// Nonzero contributions of the selected terms, term by term, with the block
/// weight divided out.
fn expansion(h: &HamiltonianSpec, keep: impl Fn(&hamline::hamiltonian::LocalTerm) -> bool, text: &str) -> Vec<(String, i64)> {
    let c = Configuration::parse(h.n, h.rounds, text).unwrap();
    let mut s = RestrictedState::default();
    s.add(&c, 0, C64::new(1.0, 0.0));
    let mut out = Vec::new();
    for t in h.terms.iter().filter(|t| keep(t)) {
        let single = HamiltonianSpec { terms: vec![t.clone()], ..h.clone() };
        for (oc, v) in apply_restricted(&single, &s).blocks {
            for a in v.iter().filter(|a| a.norm() > 1e-12) {
                out.push((oc.render().trim_matches('|').to_string(), (a.re / t.weight).round() as i64));
            }
        }
    }
    out.sort();
    out
}

fn sorted(pairs: &[(&str, i64)]) -> Vec<(String, i64)> {
    let mut v: Vec<(String, i64)> = pairs.iter().map(|(s, k)| (s.to_string(), *k)).collect();
    v.sort();
    v
}

fn worked_examples() -> (bool, String) {
    let prop = |n, r| {
        hamiltonian_for(&LayeredCircuit::identity(n, 1, r).unwrap(), Some(Couplings::unit())).unwrap().only(&[Family::Prop])
    };
    let h32 = prop(3, 2);
    let at5 = |t: &hamline::hamiltonian::LocalTerm| t.rule == Some(3) && t.anchor == 5;
    let cases: Vec<(&str, Vec<(String, i64)>, Vec<(String, i64)>)> = vec![
        (
            "C1",
            expansion(&h32, at5, "xxxqqi|q....."),
            sorted(&[("xxxqqi|q.....", 1), ("xxxqiq|q.....", -1), ("xxxqxq|q.....", -1)]),
        ),
        (
            "C2",
            expansion(&h32, at5, "xxxxqi|qiq..."),
            sorted(&[("xxxxqi|qiq...", 1), ("xxxxxq|qiq...", -1), ("xxxxiq|qiq...", -1)]),
        ),
        ("C3", expansion(&h32, at5, "xq<iqi|q....."), sorted(&[("xq<iiq|q.....", -1), ("xq<ixq|q.....", -1)])),
        ("C4", expansion(&h32, at5, "xxxxq.|......"), sorted(&[("xxxxq.|......", 1), ("xxxxxq|......", -1)])),
        (
            "round start",
            expansion(&prop(3, 3), |_| true, "xxxxxx|giqiq.|......"),
            sorted(&[
                ("xxxxxx|giqiq.|......", 1),
                ("xxxxxx|xgqiq.|......", -1),
                ("xxxxxx|giqiq.|......", 1),
                ("xxxxx<|qiqiq.|......", -1),
                ("xxxxxx|giiqq.|......", -1),
                ("xxxxxx|gixqq.|......", -1),
                ("xxxxxx|giqixq|......", -1),
            ]),
        ),
        (
            "first line",
            expansion(&h32, |_| true, "giqiq.|......"),
            sorted(&[
                ("giqiq.|......", 1),
                ("xgqiq.|......", -1),
                ("giiqq.|......", -1),
                ("gixqq.|......", -1),
                ("giqixq|......", -1),
            ]),
        ),
    ];
    let bad: Vec<&str> = cases.iter().filter(|(_, got, want)| got != want).map(|(name, _, _)| *name).collect();
    let terms: Vec<String> = cases.iter().map(|(name, got, _)| format!("{name} {}", got.len())).collect();
    (bad.is_empty(), format!("term counts {}; mismatched {:?}", terms.join(", "), bad))
}

fn w_rotation() -> (bool, String) {
    let c = LayeredCircuit::from_kinds(2, 1, &[vec![GateKind::I], vec![GateKind::Cnot]]).unwrap();
    let h = hamiltonian_for(&c, Some(Couplings::unit())).unwrap().only(&[Family::Prop]);
    let legal = legal_sequence(2, 2).unwrap();
    let rotated = rotate_out_gates(&restrict(&h, &legal).unwrap(), &c).unwrap();
    let deviation = |l: usize| -> Option<f64> {
        let walk = walk_matrix(0.5, 0.5, l).unwrap().dense_complex();
        let d = walk.nrows();
        if rotated.nrows() != 4 * d {
            return None;
        }
        let mut worst: f64 = 0.0;
        for r in 0..rotated.nrows() {
            for col in 0..rotated.ncols() {
                let want = if r / d == col / d { walk[(r % d, col % d)] } else { C64::new(0.0, 0.0) };
                worst = worst.max((rotated[(r, col)] - want).norm());
            }
        }
        Some(worst)
    };
    let pinned = deviation(19);
    let actual = deviation(legal.len() - 1).unwrap();
    let passed = pinned.is_some_and(|d| d <= 1e-12);
    (
        passed,
        format!(
            "rotated dimension {} vs {} for L = 19; deviation from I (x) walk(1/2, 1/2, {}) is {:.3e}",
            rotated.nrows(),
            4 * 20,
            legal.len() - 1,
            actual
        ),
    )
}

fn walk_spectra() -> (bool, String) {
    let t = Instant::now();
    let r = verify::appendix_suite(64).unwrap();
    let elapsed = t.elapsed();
    let ids = ["walk.half_half.eigenvalues", "walk.one_one.eigenvalues", "walk.one_half.eigenvalues", "walk.gap", "walk.one_half.lowest"];
    let passed = ids.iter().all(|id| r.get(id).is_some_and(|c| c.passed)) && elapsed < Duration::from_secs(10);
    (passed, format!("{}; {:.2} s", fmt_checks(&r, &ids), elapsed.as_secs_f64()))
}

fn spectral(report: &Report, elapsed: Duration) -> [(bool, String); 2] {
    let (a, _) = verify::probe_circuits().unwrap();
    let mut w = vec![C64::new(0.0, 0.0); 1 << a.m()];
    w[0] = C64::new(1.0, 0.0);
    let history = verify::check_history(&a, &w).unwrap();
    let acc = report.get("soundness.accepting").unwrap();
    let seven = history.passed() && acc.passed && elapsed < Duration::from_secs(900);
    let eta = history.get("history.decomposition").map(|c| c.detail.clone()).unwrap_or_default();
    let seven_text = format!(
        "<eta|H|eta>: {}; lambda_min {} (passes only because it is negative); {:.1} s",
        eta,
        fmt_num(acc.measured),
        elapsed.as_secs_f64()
    );
    let ids = ["soundness.rejecting", "soundness.history_span"];
    let eight = ids.iter().all(|id| report.get(id).is_some_and(|c| c.passed));
    let rej = report.get("soundness.rejecting").unwrap();
    let eight_text = format!(
        "rejecting lambda_min {} (need > 0 and >= {}); {}",
        fmt_num(rej.measured),
        fmt_num(rej.bound),
        fmt_checks(report, &ids[1..])
    );
    [(seven, seven_text), (eight, eight_text)]
}

fn horizons() -> (bool, String) {
    let t = Instant::now();
    let r = verify::horizon_suite(12, 100_000).unwrap();
    let elapsed = t.elapsed();
    let ids = ["horizon.forward_finite", "horizon.forward_bound", "horizon.exchange_finite"];
    let passed = r.get(ids[0]).unwrap().passed && r.get(ids[1]).unwrap().passed && elapsed < Duration::from_secs(300);
    (passed, format!("{}; {:.2} s", fmt_checks(&r, &ids), elapsed.as_secs_f64()))
}

fn negative_controls() -> (bool, String) {
    let rule = Model::with_fault(Fault::MutatedRule);
    let pen = Model::with_fault(Fault::DroppedPenFamily);
    let rule_facts = verify::check_facts_with(&rule, 3, 2).unwrap();
    let rule_pairs = verify::check_pairs(&rule).unwrap();
    let pen_pairs = verify::check_pairs(&pen).unwrap();
    let rule_caught = !rule_facts.passed() || !rule_pairs.passed();
    let pen_caught = !pen_pairs.passed();
    (
        rule_caught && pen_caught,
        format!(
            "mutated rule caught: {rule_caught} ({}); dropped penalty family caught: {pen_caught} ({})",
            rule_facts.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect::<Vec<_>>().join(", "),
            pen_pairs.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (passed, summary) = f();
    Outcome { id, name, passed, summary, runtime: t.elapsed() }
}

fn main() {
    let mut outcomes = vec![
        timed(1, "legal sequence", legal_sequence_exactness),
        timed(2, "pair census", pair_census),
        timed(3, "facts suite", facts_suite),
        timed(4, "worked examples", worked_examples),
        timed(5, "gate rotation", w_rotation),
        timed(6, "walk spectra", walk_spectra),
    ];
    let t = Instant::now();
    let (a, r) = verify::probe_circuits().unwrap();
    let probe = verify::soundness_probe(&a, &r, &ProbeOptions::default()).unwrap();
    let elapsed = t.elapsed();
    let [seven, eight] = spectral(&probe, elapsed);
    outcomes.push(Outcome { id: 7, name: "completeness", passed: seven.0, summary: seven.1, runtime: elapsed });
    outcomes.push(Outcome { id: 8, name: "soundness probe", passed: eight.0, summary: eight.1, runtime: Duration::ZERO });
    outcomes.push(timed(9, "horizons", horizons));
    outcomes.push(timed(10, "negative controls", negative_controls));

    let mut unexpected = Vec::new();
    for o in &outcomes {
        let known = KNOWN_FAILURES.contains(&o.id);
        let tag = match (o.passed, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if o.passed == known {
            unexpected.push(o.id);
        }
        println!("criterion {:>2} {:<18} {tag}: {} [{:.2} s]", o.id, o.name, o.summary, o.runtime.as_secs_f64());
    }
    println!();
    println!("soundness report:");
    print!("{}", probe.to_text(false));
    if unexpected.is_empty() {
        println!("acceptance: outcomes as recorded ({} pass, {} known failures)", 10 - KNOWN_FAILURES.len(), KNOWN_FAILURES.len());
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
