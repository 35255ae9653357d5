//! `hamline`: compile circuits into chain Hamiltonians, trace the legal
//! sequence, compute spectra and run the verification suites.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 validation error,
//! 3 a verification suite failed.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hamline::chain::{initial_configuration, invariant_set, legal_sequence, Configuration, RuleSet, DEFAULT_BFS_CAP};
use hamline::circuit::{parse_circuit, LayeredCircuit};
use hamline::hamiltonian::{census, export_coo, export_terms, hamiltonian_for, parse_terms, Couplings, HamiltonianSpec};
use hamline::spectra::{lanczos, min_eigs_restricted, restrict, FullOperator, LanczosOptions};
use hamline::verify::{self, Fault, Model, ProbeOptions, Report};
use hamline::Error;

#[derive(Parser, Debug)]
#[command(name = "hamline", version, about = "Eight-state chain Hamiltonians for layered circuits")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the Hamiltonian of a circuit and write its term list.
    Compile {
        #[command(flatten)]
        source: Source,
        /// Term-list output (JSON lines); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full matrix as `row col re im` (2nR <= 8 only).
        #[arg(long)]
        coo: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = CouplingChoice::Auto)]
        couplings: CouplingChoice,
    },
    /// Print the legal configurations with the rule leading to the next one.
    Sequence {
        #[arg(long)]
        n: usize,
        #[arg(long = "R")]
        rounds: usize,
        /// Annotate with sub-rules (2a, 3b, ...) instead of rule numbers.
        #[arg(long)]
        sub_rules: bool,
    },
    /// Lowest eigenvalues of a Hamiltonian.
    Spectrum {
        /// Term list written by `compile`.
        #[arg(long)]
        ham: Option<PathBuf>,
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Method::Dense)]
        method: Method,
        /// Number of eigenvalues.
        #[arg(long, default_value_t = 4)]
        eigs: usize,
        /// Configuration set for `--method subspace`.
        #[arg(long, value_enum, default_value_t = SetChoice::Legal)]
        set: SetChoice,
        /// Residual target for Lanczos, relative to the largest matrix entry.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Stored Lanczos vectors (capped at 6 on spaces above 2^20).
        #[arg(long, default_value_t = 60)]
        max_basis: usize,
        /// Eigenvalues at or above this may be skipped by `--method dense`
        /// when the space is too large to solve every block.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Run a verification suite; exit 3 if it fails.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long = "R", default_value_t = 2)]
        rounds: usize,
        /// Circuit for the history suite; the built-in accepting and
        /// rejecting pair when omitted.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long = "Lmax", default_value_t = 64)]
        lmax: usize,
        /// Longest chain enumerated by the horizon suite.
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        #[arg(long, default_value_t = 100_000)]
        bfs_cap: usize,
        /// Matrix-vector products of the full-space Lanczos run in the
        /// soundness suite.
        #[arg(long, default_value_t = 8)]
        lanczos_steps: usize,
        /// Structured report (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include per-check runtimes (reports are otherwise reproducible
        /// byte for byte).
        #[arg(long)]
        timings: bool,
        /// Run against a deliberately broken model.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultChoice>,
    },
}

#[derive(clap::Args, Debug)]
struct Source {
    /// Circuit file (JSON).
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Qubits of the identity circuit used when no circuit is given.
    #[arg(long)]
    n: Option<usize>,
    /// Rounds of the identity circuit.
    #[arg(long = "R")]
    rounds: Option<usize>,
    /// Witness qubits of the identity circuit.
    #[arg(long, default_value_t = 1)]
    m: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CouplingChoice {
    Auto,
    Unit,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Dense,
    Lanczos,
    Subspace,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SetChoice {
    /// The legal sequence.
    Legal,
    /// Everything reachable from the initial configuration by exchanges.
    Initial,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Suite {
    Pairs,
    Facts,
    History,
    Soundness,
    Appendix,
    Horizon,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FaultChoice {
    Rule,
    Pen,
}

/// Errors leaving `run`, already mapped to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Io(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Ok(v) = std::env::var("HAMLINE_THREADS") {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: HAMLINE_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn log_config(cli: &Cli) {
    let config = match &cli.command {
        Command::Compile { source, out, coo, couplings } => json!({
            "command": "compile", "circuit": source.circuit, "n": source.n, "R": source.rounds, "m": source.m,
            "out": out, "coo": coo, "couplings": format!("{couplings:?}").to_lowercase(),
        }),
        Command::Sequence { n, rounds, sub_rules } => json!({"command": "sequence", "n": n, "R": rounds, "sub_rules": sub_rules}),
        Command::Spectrum { ham, source, method, eigs, set, tol, max_iter, max_basis, threshold } => json!({
            "command": "spectrum", "ham": ham, "circuit": source.circuit, "n": source.n, "R": source.rounds, "m": source.m,
            "method": format!("{method:?}").to_lowercase(), "eigs": eigs, "set": format!("{set:?}").to_lowercase(),
            "tol": tol, "max_iter": max_iter, "max_basis": max_basis, "threshold": threshold,
        }),
        Command::Verify { suite, n, rounds, circuit, lmax, max_len, bfs_cap, lanczos_steps, out, timings, inject_fault } => json!({
            "command": "verify", "suite": format!("{suite:?}").to_lowercase(), "n": n, "R": rounds, "circuit": circuit,
            "Lmax": lmax, "max_len": max_len, "bfs_cap": bfs_cap, "lanczos_steps": lanczos_steps, "out": out,
            "timings": timings, "inject_fault": inject_fault.map(|f| format!("{f:?}").to_lowercase()),
        }),
    };
    let threads = std::env::var("HAMLINE_THREADS").ok();
    eprintln!("config: {}", json!({"seed": cli.seed, "threads": threads, "run": config}));
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    log_config(cli);
    match &cli.command {
        Command::Compile { source, out, coo, couplings } => {
            let circuit = load_circuit(source)?;
            let c = match couplings {
                CouplingChoice::Auto => None,
                CouplingChoice::Unit => Some(Couplings::unit()),
            };
            let h = hamiltonian_for(&circuit, c)?;
            let text = export_terms(&h);
            let summary = census_text(&h);
            match out {
                Some(path) => {
                    fs::write(path, text).map_err(Error::from)?;
                    print!("{summary}");
                }
                None => {
                    print!("{text}");
                    eprint!("{summary}");
                }
            }
            if let Some(path) = coo {
                let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(Error::from)?);
                export_coo(&h, &mut f)?;
                f.flush().map_err(Error::from)?;
            }
            Ok(0)
        }
        Command::Sequence { n, rounds, sub_rules } => {
            let trace = RuleSet::standard().legal_trace(*n, *rounds)?;
            let mut out = String::new();
            for (c, rule) in &trace {
                out.push_str(&sequence_line(c));
                if let Some(r) = rule {
                    out.push(' ');
                    if *sub_rules {
                        out.push_str(r.rule.name());
                    } else {
                        out.push_str(&r.rule.family().to_string());
                    }
                }
                out.push('\n');
            }
            print!("{out}");
            Ok(0)
        }
        Command::Spectrum { ham, source, method, eigs, set, tol, max_iter, max_basis, threshold } => {
            let h = match ham {
                Some(path) => parse_terms(&fs::read_to_string(path).map_err(Error::from)?)?,
                None => hamiltonian_for(&load_circuit(source)?, None)?,
            };
            if *eigs == 0 {
                return Err(usage("--eigs must be positive"));
            }
            spectrum(&h, *method, *eigs, *set, *tol, *max_iter, *max_basis, *threshold, cli.seed)?;
            Ok(0)
        }
        Command::Verify { suite, n, rounds, circuit, lmax, max_len, bfs_cap, lanczos_steps, out, timings, inject_fault } => {
            let model = match inject_fault {
                None => Model::standard(),
                Some(FaultChoice::Rule) => Model::with_fault(Fault::MutatedRule),
                Some(FaultChoice::Pen) => Model::with_fault(Fault::DroppedPenFamily),
            };
            let circuit = match circuit {
                Some(p) => Some(parse_circuit(&fs::read_to_string(p).map_err(Error::from)?)?),
                None => None,
            };
            let probe = ProbeOptions { seed: cli.seed, lanczos_steps: *lanczos_steps, set_cap: 20_000, ..Default::default() };
            let want = |s: Suite| *suite == s || *suite == Suite::All;
            let mut reports: Vec<Report> = Vec::new();
            if want(Suite::Pairs) {
                reports.push(verify::check_pairs(&model)?);
            }
            if want(Suite::Facts) {
                if *suite == Suite::Facts {
                    reports.push(verify::check_pairs(&model)?);
                }
                reports.push(verify::check_facts_with(&model, *n, *rounds)?);
            }
            if want(Suite::History) {
                let circuits = match &circuit {
                    Some(c) => vec![c.clone()],
                    None => {
                        let (a, r) = verify::probe_circuits()?;
                        vec![a, r]
                    }
                };
                for c in &circuits {
                    let mut w = vec![num_complex::Complex64::new(0.0, 0.0); 1 << c.m()];
                    w[0] = num_complex::Complex64::new(1.0, 0.0);
                    reports.push(verify::check_history(c, &w)?);
                }
            }
            if want(Suite::Appendix) {
                reports.push(verify::appendix_suite(*lmax)?);
            }
            if want(Suite::Horizon) {
                reports.push(verify::horizon_suite(*max_len, *bfs_cap)?);
            }
            if want(Suite::Soundness) {
                let (a, r) = verify::probe_circuits()?;
                reports.push(verify::soundness_probe(&a, &r, &probe)?);
            }
            let mut text = String::new();
            let mut lines = String::new();
            for r in &reports {
                text.push_str(&r.to_text(*timings));
                lines.push_str(&r.to_json_lines(*timings));
            }
            print!("{text}");
            if let Some(path) = out {
                fs::write(path, lines).map_err(Error::from)?;
            }
            let passed = reports.iter().all(Report::passed);
            println!("overall: {}", if passed { "PASS" } else { "FAIL" });
            Ok(if passed { 0 } else { 3 })
        }
    }
}

fn load_circuit(source: &Source) -> Result<LayeredCircuit, Failure> {
    match (&source.circuit, source.n, source.rounds) {
        (Some(path), _, _) => Ok(parse_circuit(&fs::read_to_string(path).map_err(Error::from)?)?),
        (None, Some(n), Some(r)) => Ok(LayeredCircuit::identity(n, source.m, r)?),
        _ => Err(usage("give --circuit, or --n and --R for an identity circuit")),
    }
}

/// Sites with `|` between blocks, as in the sequence tables.
fn sequence_line(c: &Configuration) -> String {
    c.render().trim_matches('|').to_string()
}

fn census_text(h: &HamiltonianSpec) -> String {
    let c = census(&h.terms);
    let mut s = format!("n = {}, R = {}, K = {}, sites = {}\n", h.n, h.rounds, h.k, h.sites());
    s.push_str(&format!(
        "couplings: j_in = {}, j_prop = {}, j_pen = {}, j_out = 1\n",
        h.couplings.j_in, h.couplings.j_prop, h.couplings.j_pen
    ));
    let fams: Vec<String> = c.per_family.iter().map(|(k, v)| format!("{k} {v}")).collect();
    s.push_str(&format!("terms: {} ({})\n", c.total, fams.join(", ")));
    s.push_str(&format!("pen families: {}\n", c.pen_families));
    let locs: Vec<String> = c.pen_per_location.iter().map(|(k, v)| format!("{k} {v}")).collect();
    s.push_str(&format!("pen terms per location: {}\n", locs.join(", ")));
    let rules: Vec<String> = c.prop_per_rule.iter().map(|(k, v)| format!("{k} {v}")).collect();
    s.push_str(&format!("prop terms per rule: {}; transitions {}\n", rules.join(", "), c.prop_transitions));
    s
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    h: &HamiltonianSpec,
    method: Method,
    k: usize,
    set: SetChoice,
    tol: f64,
    max_iter: usize,
    max_basis: usize,
    threshold: f64,
    seed: u64,
) -> Result<(), Failure> {
    match method {
        Method::Dense => {
            let op = FullOperator::new(h)?;
            let dim = 1usize << (3 * h.sites());
            // every block is solved on small spaces; larger ones skip blocks
            // whose Gershgorin bound clears the threshold
            let cut = if dim <= 1 << 16 { f64::INFINITY } else { threshold };
            let bs = op.block_spectrum(k, cut)?;
            println!("# dimension {dim}, {} blocks, {} solved, largest {}", bs.blocks, bs.solved, bs.largest_solved);
            if cut.is_finite() {
                println!("# eigenvalues >= {cut} may be missing; skipped blocks are bounded below by {:.6e}", bs.bounded_min);
            }
            for (i, (v, rep, size)) in bs.lowest.iter().enumerate() {
                println!("{i} {v:.15e} block {size} at index {rep}");
            }
        }
        Method::Lanczos => {
            let op = FullOperator::new(h)?;
            let dim = 1usize << (3 * h.sites());
            let basis = if dim > 1 << 20 { max_basis.min(6) } else { max_basis };
            let opts = LanczosOptions { k, tol: tol * op.scale(), max_iter, max_basis: basis.max(k + 2), seed, start: None };
            let e = lanczos(&op, &opts)?;
            println!("# dimension {dim}, {} matvecs, converged {}", e.iterations, e.converged);
            for (i, (v, r)) in e.values.iter().zip(&e.residuals).enumerate() {
                println!("{i} {v:.15e} residual {r:.3e}");
            }
        }
        Method::Subspace => {
            let configs = match set {
                SetChoice::Legal => legal_sequence(h.n, h.rounds)?,
                SetChoice::Initial => {
                    let s = invariant_set(&initial_configuration(h.n, h.rounds)?, DEFAULT_BFS_CAP);
                    if s.capped {
                        return Err(Failure { code: 2, message: "invariant set exceeds the search cap".into() });
                    }
                    s.members
                }
            };
            let rest = restrict(h, &configs)?;
            let e = min_eigs_restricted(&rest, &LanczosOptions { k, tol, max_iter, seed, ..Default::default() })?;
            println!("# {} configurations, dimension {}", configs.len(), rest.dim());
            for (i, v) in e.values.iter().enumerate() {
                println!("{i} {v:.15e}");
            }
        }
    }
    Ok(())
}
