//! Verifier circuits in layered nearest-neighbor form.
//!
//! A [`LayeredCircuit`] on `n` qubits is a list of rounds; round `r` holds
//! exactly `n - 1` two-qubit gates and gate `g` of a round acts on qubits
//! `(g, g + 1)`. Gates inside a round are applied in slot order, rounds in
//! list order. Round 1 is always all-identity.
//!
//! Two-qubit matrices use the basis `|ab>` with index `2a + b`, where `a` is
//! the left (lower-numbered) qubit. Named single-qubit tags (`H`, `X`, `T`)
//! act on the left qubit of the pair; `CNOT` has its control on the left.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde_json::Value;

use crate::error::{Error, Result};

/// Unitarity tolerance for explicit matrices.
pub const UNITARY_TOL: f64 = 1e-12;

pub type Mat4 = [[C64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    I,
    H,
    X,
    T,
    Cnot,
    Swap,
    Cz,
    Matrix(Mat4),
}

impl GateKind {
    pub fn from_name(name: &str) -> Option<GateKind> {
        Some(match name.to_ascii_uppercase().as_str() {
            "I" | "ID" | "IDENTITY" => GateKind::I,
            "H" => GateKind::H,
            "X" => GateKind::X,
            "T" => GateKind::T,
            "CNOT" | "CX" => GateKind::Cnot,
            "SWAP" => GateKind::Swap,
            "CZ" => GateKind::Cz,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::I => "I",
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::T => "T",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::Cz => "CZ",
            GateKind::Matrix(_) => "MATRIX",
        }
    }

    pub fn matrix(&self) -> Mat4 {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let mut m = [[z; 4]; 4];
        match self {
            GateKind::I => {
                for (k, row) in m.iter_mut().enumerate() {
                    row[k] = o;
                }
            }
            GateKind::H => {
                let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                // H on the left qubit: |ab> -> sum_a' H[a'][a] |a'b>
                for a in 0..2 {
                    for b in 0..2 {
                        for a2 in 0..2 {
                            let sign = if a == 1 && a2 == 1 { -1.0 } else { 1.0 };
                            m[2 * a2 + b][2 * a + b] = h * sign;
                        }
                    }
                }
            }
            GateKind::X => {
                for a in 0..2 {
                    for b in 0..2 {
                        m[2 * (1 - a) + b][2 * a + b] = o;
                    }
                }
            }
            GateKind::T => {
                let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
                m[0][0] = o;
                m[1][1] = o;
                m[2][2] = phase;
                m[3][3] = phase;
            }
            GateKind::Cnot => {
                m[0][0] = o;
                m[1][1] = o;
                m[3][2] = o;
                m[2][3] = o;
            }
            GateKind::Swap => {
                m[0][0] = o;
                m[2][1] = o;
                m[1][2] = o;
                m[3][3] = o;
            }
            GateKind::Cz => {
                m[0][0] = o;
                m[1][1] = o;
                m[2][2] = o;
                m[3][3] = -o;
            }
            GateKind::Matrix(u) => m = *u,
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GateKind::I => true,
            GateKind::Matrix(u) => max_deviation_from_identity(u) <= UNITARY_TOL,
            _ => false,
        }
    }
}

fn max_deviation_from_identity(u: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, row) in u.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((v - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Entrywise `max |U^dag U - I|`.
pub fn unitarity_deviation(u: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..4 {
                acc += u[k][i].conj() * u[k][j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// A two-qubit gate acting on qubits `(target, target + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2Q {
    pub kind: GateKind,
    /// 1-based index of the left qubit.
    pub target: usize,
}

impl Gate2Q {
    pub fn new(kind: GateKind, target: usize) -> Result<Self> {
        if let GateKind::Matrix(u) = &kind {
            let deviation = unitarity_deviation(u);
            if deviation > UNITARY_TOL {
                return Err(Error::NonUnitary { deviation });
            }
        }
        Ok(Gate2Q { kind, target })
    }

    pub fn identity(target: usize) -> Self {
        Gate2Q { kind: GateKind::I, target }
    }

    pub fn matrix(&self) -> Mat4 {
        self.kind.matrix()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredCircuit {
    n: usize,
    m: usize,
    rounds: Vec<Vec<Gate2Q>>,
}

impl LayeredCircuit {
    /// Validates the layered shape: `n >= 2`, `m <= n`, at least one round,
    /// `n - 1` gates per round with gate `g` targeting qubit `g`, and an
    /// all-identity first round.
    pub fn new(n: usize, m: usize, rounds: Vec<Vec<Gate2Q>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewQubits(n));
        }
        if m > n {
            return Err(Error::InvalidArgument(format!("witness count m={m} exceeds n={n}")));
        }
        if rounds.is_empty() {
            return Err(Error::InvalidArgument("circuit has no rounds".into()));
        }
        for (r, round) in rounds.iter().enumerate() {
            if round.len() != n - 1 {
                return Err(Error::ShapeMismatch(format!(
                    "round {} has {} gates, expected {}",
                    r + 1,
                    round.len(),
                    n - 1
                )));
            }
            for (g, gate) in round.iter().enumerate() {
                if gate.target != g + 1 {
                    return Err(Error::GateOutOfRange { index: gate.target, qubits: n });
                }
                if let GateKind::Matrix(u) = &gate.kind {
                    let deviation = unitarity_deviation(u);
                    if deviation > UNITARY_TOL {
                        return Err(Error::NonUnitary { deviation });
                    }
                }
            }
        }
        if !rounds[0].iter().all(|g| g.kind.is_identity()) {
            return Err(Error::InvalidArgument("round 1 must consist of identity gates".into()));
        }
        Ok(LayeredCircuit { n, m, rounds })
    }

    /// Builds a circuit from named gates per round, slot order implied.
    pub fn from_kinds(n: usize, m: usize, rounds: &[Vec<GateKind>]) -> Result<Self> {
        let mut out = Vec::with_capacity(rounds.len());
        for round in rounds {
            let mut gates = Vec::with_capacity(round.len());
            for (g, kind) in round.iter().enumerate() {
                gates.push(Gate2Q::new(*kind, g + 1)?);
            }
            out.push(gates);
        }
        LayeredCircuit::new(n, m, out)
    }

    /// The all-identity circuit with `rounds` rounds.
    pub fn identity(n: usize, m: usize, rounds: usize) -> Result<Self> {
        let round: Vec<GateKind> = vec![GateKind::I; n.saturating_sub(1)];
        LayeredCircuit::from_kinds(n, m, &vec![round; rounds])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of rounds `R` (equal to the number of blocks on the chain).
    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn round(&self, r: usize) -> &[Gate2Q] {
        &self.rounds[r - 1]
    }

    pub fn all_rounds(&self) -> &[Vec<Gate2Q>] {
        &self.rounds
    }

    /// Gates in application order.
    pub fn gates(&self) -> impl Iterator<Item = &Gate2Q> {
        self.rounds.iter().flatten()
    }

    /// Dense `2^n x 2^n` unitary; qubit 1 is the most significant bit.
    pub fn unitary(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for gate in self.gates() {
            apply_gate_to_columns(&mut u, self.n, gate.target, gate.target + 1, &gate.matrix());
        }
        u
    }

    /// Final `n`-qubit state for the given input (qubit 1 most significant).
    pub fn simulate(&self, input: &[C64]) -> Vec<C64> {
        let mut state = input.to_vec();
        for gate in self.gates() {
            apply_two_qubit(&mut state, self.n, gate.target, gate.target + 1, &gate.matrix());
        }
        state
    }
}

/// Applies a two-qubit matrix to qubits `(a, b)` of an `n`-qubit state;
/// `a` addresses the high bit of the 4x4 index. Qubits are 1-based with
/// qubit 1 the most significant bit.
pub fn apply_two_qubit(state: &mut [C64], n: usize, a: usize, b: usize, u: &Mat4) {
    let bit_a = 1usize << (n - a);
    let bit_b = 1usize << (n - b);
    for base in 0..state.len() {
        if base & bit_a != 0 || base & bit_b != 0 {
            continue;
        }
        let idx = [base, base | bit_b, base | bit_a, base | bit_a | bit_b];
        let old = [state[idx[0]], state[idx[1]], state[idx[2]], state[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..4 {
                acc += u[r][c] * old[c];
            }
            state[target] = acc;
        }
    }
}

fn apply_gate_to_columns(m: &mut DMatrix<C64>, n: usize, a: usize, b: usize, u: &Mat4) {
    for col in 0..m.ncols() {
        let mut column: Vec<C64> = m.column(col).iter().copied().collect();
        apply_two_qubit(&mut column, n, a, b, u);
        for (row, v) in column.into_iter().enumerate() {
            m[(row, col)] = v;
        }
    }
}

/// A gate of an unconstrained circuit: `matrix` acts on `(first, second)`
/// with `first` addressing the high bit of the 4x4 index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeGate {
    pub kind: GateKind,
    pub first: usize,
    pub second: usize,
}

/// An arbitrary circuit of two-qubit gates, not necessarily nearest-neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeCircuit {
    pub n: usize,
    pub m: usize,
    pub gates: Vec<FreeGate>,
}

impl FreeCircuit {
    pub fn unitary(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for gate in &self.gates {
            apply_gate_to_columns(&mut u, self.n, gate.first, gate.second, &gate.kind.matrix());
        }
        u
    }
}

fn conjugate_by_swap(u: &Mat4) -> Mat4 {
    let s = GateKind::Swap.matrix();
    mat4_mul(&s, &mat4_mul(u, &s))
}

/// Recasts an arbitrary two-qubit circuit into layered nearest-neighbor form.
///
/// Each gate on `(a, b)` with `|a - b| > 1` is routed by a SWAP ladder that
/// brings the higher qubit next to the lower one, applied, and then undone,
/// costing `2(|a-b| - 1)` extra gates. The resulting nearest-neighbor gate
/// list is packed greedily into rounds (a new round starts whenever the next
/// slot is not to the right of the last filled slot) and an all-identity round
/// is prepended.
pub fn layerize(circuit: &FreeCircuit) -> Result<LayeredCircuit> {
    let n = circuit.n;
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    let mut nn: Vec<(usize, GateKind)> = Vec::new();
    for gate in &circuit.gates {
        let (a, b) = (gate.first, gate.second);
        if a == 0 || b == 0 || a > n || b > n {
            return Err(Error::GateOutOfRange { index: a.max(b).max(1).min(a.min(b).max(n + 1)), qubits: n });
        }
        if a == b {
            return Err(Error::InvalidArgument(format!("gate acts twice on qubit {a}")));
        }
        let lo = a.min(b);
        let hi = a.max(b);
        let ladder: Vec<usize> = (lo + 1..hi).rev().collect();
        for &slot in &ladder {
            nn.push((slot, GateKind::Swap));
        }
        let u = gate.kind.matrix();
        let kind = if a < b {
            gate.kind
        } else {
            GateKind::Matrix(conjugate_by_swap(&u))
        };
        nn.push((lo, kind));
        for &slot in ladder.iter().rev() {
            nn.push((slot, GateKind::Swap));
        }
    }

    let idle = || vec![GateKind::I; n - 1];
    let mut rounds: Vec<Vec<GateKind>> = vec![idle()];
    let mut current: Option<(Vec<GateKind>, usize)> = None;
    for (slot, kind) in nn {
        match current.as_mut() {
            Some((round, last)) if slot > *last => {
                round[slot - 1] = kind;
                *last = slot;
            }
            _ => {
                if let Some((round, _)) = current.take() {
                    rounds.push(round);
                }
                let mut round = idle();
                round[slot - 1] = kind;
                current = Some((round, slot));
            }
        }
    }
    if let Some((round, _)) = current {
        rounds.push(round);
    }
    LayeredCircuit::from_kinds(n, circuit.m, &rounds)
}

/// Returns the gate installed at the type-B pair `(i, i+1)`:
/// gate `g` of round `r` sits at `i = 2(r-1)n + 2g`.
pub fn gate_at_location(circuit: &LayeredCircuit, i: usize) -> Result<Gate2Q> {
    let (r, g) = location_to_slot(circuit.n(), circuit.rounds(), i)?;
    Ok(circuit.round(r)[g - 1])
}

/// Inverse of `slot_to_location`: type-B pair index to `(round, slot)`.
pub fn location_to_slot(n: usize, rounds: usize, i: usize) -> Result<(usize, usize)> {
    let err = Error::NotTypeB { site: i, n, rounds };
    if i == 0 || i % 2 == 1 || i >= 2 * n * rounds {
        return Err(err);
    }
    let r = (i - 1) / (2 * n) + 1;
    let offset = i - 2 * (r - 1) * n;
    let g = offset / 2;
    if g == 0 || g >= n {
        return Err(err);
    }
    Ok((r, g))
}

pub fn slot_to_location(n: usize, r: usize, g: usize) -> usize {
    2 * (r - 1) * n + 2 * g
}

fn parse_gate_kind(value: &Value) -> Result<GateKind> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse(format!("gate must be an object, got {value}")))?;
    if let Some(name) = obj.get("kind") {
        let name = name.as_str().ok_or_else(|| Error::Parse("gate kind must be a string".into()))?;
        return GateKind::from_name(name).ok_or_else(|| Error::Parse(format!("unknown gate kind {name:?}")));
    }
    if let Some(matrix) = obj.get("matrix") {
        let rows = matrix
            .as_array()
            .filter(|r| r.len() == 4)
            .ok_or_else(|| Error::Parse("matrix must have 4 rows".into()))?;
        let mut u = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in rows.iter().enumerate() {
            let cols = row
                .as_array()
                .filter(|c| c.len() == 4)
                .ok_or_else(|| Error::Parse("matrix rows must have 4 entries".into()))?;
            for (c, entry) in cols.iter().enumerate() {
                let pair = entry
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::Parse("matrix entries must be [re, im]".into()))?;
                let re = pair[0].as_f64().ok_or_else(|| Error::Parse("non-numeric entry".into()))?;
                let im = pair[1].as_f64().ok_or_else(|| Error::Parse("non-numeric entry".into()))?;
                u[r][c] = C64::new(re, im);
            }
        }
        let deviation = unitarity_deviation(&u);
        if deviation > UNITARY_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        return Ok(GateKind::Matrix(u));
    }
    Err(Error::Parse("gate needs either \"kind\" or \"matrix\"".into()))
}

fn parse_usize(obj: &serde_json::Map<String, Value>, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::Parse(format!("missing or invalid integer field {key:?}")))
}

/// Parses a circuit file. Two top-level forms are accepted:
///
/// ```json
/// {"n": 3, "m": 1, "rounds": [[{"kind": "I"}, {"kind": "I"}], [{"kind": "CNOT"}, {"kind": "I"}]]}
/// {"n": 3, "m": 1, "gates": [{"kind": "CNOT", "qubits": [1, 3]}]}
/// ```
///
/// The `gates` form is routed through [`layerize`].
pub fn parse_circuit(text: &str) -> Result<LayeredCircuit> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("circuit file must be an object".into()))?;
    let n = parse_usize(obj, "n")?;
    let m = parse_usize(obj, "m")?;
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }

    if let Some(rounds) = obj.get("rounds") {
        let rounds = rounds.as_array().ok_or_else(|| Error::Parse("\"rounds\" must be a list".into()))?;
        let mut parsed = Vec::with_capacity(rounds.len());
        for (r, round) in rounds.iter().enumerate() {
            let gates = round
                .as_array()
                .ok_or_else(|| Error::Parse(format!("round {} must be a list", r + 1)))?;
            if gates.len() != n - 1 {
                return Err(Error::ShapeMismatch(format!(
                    "round {} has {} gates, expected {}",
                    r + 1,
                    gates.len(),
                    n - 1
                )));
            }
            let mut row = Vec::with_capacity(gates.len());
            for (g, gate) in gates.iter().enumerate() {
                if let Some(t) = gate.get("target") {
                    let t = t.as_u64().ok_or_else(|| Error::Parse("target must be an integer".into()))? as usize;
                    if t != g + 1 {
                        return Err(Error::GateOutOfRange { index: t, qubits: n });
                    }
                }
                row.push(Gate2Q::new(parse_gate_kind(gate)?, g + 1)?);
            }
            parsed.push(row);
        }
        return LayeredCircuit::new(n, m, parsed);
    }

    if let Some(gates) = obj.get("gates") {
        let gates = gates.as_array().ok_or_else(|| Error::Parse("\"gates\" must be a list".into()))?;
        let mut free = Vec::with_capacity(gates.len());
        for gate in gates {
            let kind = parse_gate_kind(gate)?;
            let qubits = gate
                .get("qubits")
                .and_then(Value::as_array)
                .filter(|q| q.len() == 2)
                .ok_or_else(|| Error::Parse("flat gate needs \"qubits\": [a, b]".into()))?;
            let a = qubits[0].as_u64().ok_or_else(|| Error::Parse("qubit index must be an integer".into()))? as usize;
            let b = qubits[1].as_u64().ok_or_else(|| Error::Parse("qubit index must be an integer".into()))? as usize;
            for q in [a, b] {
                if q == 0 || q > n {
                    return Err(Error::GateOutOfRange { index: q, qubits: n });
                }
            }
            free.push(FreeGate { kind, first: a, second: b });
        }
        if m > n {
            return Err(Error::InvalidArgument(format!("witness count m={m} exceeds n={n}")));
        }
        return layerize(&FreeCircuit { n, m, gates: free });
    }

    Err(Error::Parse("circuit file needs \"rounds\" or \"gates\"".into()))
}

/// Serializes a layered circuit in the `rounds` form accepted by [`parse_circuit`].
pub fn circuit_to_json(circuit: &LayeredCircuit) -> Value {
    let rounds: Vec<Value> = circuit
        .all_rounds()
        .iter()
        .map(|round| {
            Value::Array(
                round
                    .iter()
                    .map(|gate| match &gate.kind {
                        GateKind::Matrix(u) => {
                            let rows: Vec<Value> = u
                                .iter()
                                .map(|row| {
                                    Value::Array(row.iter().map(|v| serde_json::json!([v.re, v.im])).collect())
                                })
                                .collect();
                            serde_json::json!({ "matrix": rows })
                        }
                        kind => serde_json::json!({ "kind": kind.name() }),
                    })
                    .collect(),
            )
        })
        .collect();
    serde_json::json!({ "n": circuit.n(), "m": circuit.m(), "rounds": rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn named_gates_are_unitary() {
        for kind in [GateKind::I, GateKind::H, GateKind::X, GateKind::T, GateKind::Cnot, GateKind::Swap, GateKind::Cz] {
            assert!(unitarity_deviation(&kind.matrix()) < 1e-15, "{}", kind.name());
        }
    }

    #[test]
    fn cnot_controls_on_left() {
        let c = GateKind::Cnot.matrix();
        // |10> -> |11>
        assert_eq!(c[3][2], C64::new(1.0, 0.0));
        assert_eq!(c[1][1], C64::new(1.0, 0.0));
    }

    #[test]
    fn parse_identity_round() {
        let c = parse_circuit(r#"{"n": 2, "m": 1, "rounds": [[{"kind": "I"}]]}"#).unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(c.rounds(), 1);
    }

    #[test]
    fn parse_matches_hand_built() {
        let text = r#"{"n": 3, "m": 1, "rounds": [[{"kind": "I"}, {"kind": "I"}], [{"kind": "CNOT"}, {"kind": "I"}]]}"#;
        let parsed = parse_circuit(text).unwrap();
        let built = LayeredCircuit::from_kinds(3, 1, &[vec![GateKind::I, GateKind::I], vec![GateKind::Cnot, GateKind::I]]).unwrap();
        assert_eq!(parsed, built);
        assert_eq!(parsed.rounds(), 2);
        let again = parse_circuit(&circuit_to_json(&parsed).to_string()).unwrap();
        assert_eq!(again, parsed);
    }

    #[test]
    fn parse_rejects_non_unitary() {
        let text = r#"{"n": 2, "m": 1, "rounds": [[{"kind": "I"}], [{"matrix": [
            [[1,0],[1,0],[0,0],[0,0]],
            [[0,0],[1,0],[0,0],[0,0]],
            [[0,0],[0,0],[1,0],[0,0]],
            [[0,0],[0,0],[0,0],[1,0]]]}]]}"#;
        assert!(matches!(parse_circuit(text), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn parse_rejects_bad_shapes() {
        assert!(matches!(parse_circuit("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_circuit(r#"{"n": 3, "m": 1, "rounds": [[{"kind": "I"}]]}"#),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            parse_circuit(r#"{"n": 3, "m": 1, "gates": [{"kind": "CNOT", "qubits": [1, 4]}]}"#),
            Err(Error::GateOutOfRange { index: 4, .. })
        ));
        assert!(matches!(
            parse_circuit(r#"{"n": 2, "m": 1, "rounds": [[{"kind": "X"}]]}"#),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn layerize_routes_long_cnot() {
        let free = FreeCircuit { n: 3, m: 1, gates: vec![FreeGate { kind: GateKind::Cnot, first: 1, second: 3 }] };
        let layered = layerize(&free).unwrap();
        assert!(layered.round(1).iter().all(|g| g.kind == GateKind::I));
        assert!(max_diff(&layered.unitary(), &free.unitary()) < 1e-12);
        // SWAP(2,3) CNOT(1,2) SWAP(2,3) packed as [I,SWAP], [CNOT,SWAP]
        assert_eq!(layered.rounds(), 3);
        assert_eq!(layered.round(2)[1].kind, GateKind::Swap);
        assert_eq!(layered.round(3)[0].kind, GateKind::Cnot);
        assert_eq!(layered.round(3)[1].kind, GateKind::Swap);
    }

    #[test]
    fn layerize_reversed_orientation() {
        let free = FreeCircuit { n: 4, m: 2, gates: vec![FreeGate { kind: GateKind::Cnot, first: 4, second: 1 }] };
        let layered = layerize(&free).unwrap();
        assert!(max_diff(&layered.unitary(), &free.unitary()) < 1e-12);
    }

    #[test]
    fn layerize_empty_gives_identity_round() {
        let layered = layerize(&FreeCircuit { n: 2, m: 1, gates: vec![] }).unwrap();
        assert_eq!(layered.rounds(), 1);
        assert!(layered.round(1)[0].kind.is_identity());
    }

    #[test]
    fn layerize_fixed_point_up_to_prefix() {
        let gates = vec![
            FreeGate { kind: GateKind::H, first: 1, second: 2 },
            FreeGate { kind: GateKind::Cnot, first: 2, second: 3 },
            FreeGate { kind: GateKind::Cz, first: 1, second: 2 },
        ];
        let layered = layerize(&FreeCircuit { n: 3, m: 1, gates }).unwrap();
        let expected = LayeredCircuit::from_kinds(
            3,
            1,
            &[vec![GateKind::I, GateKind::I], vec![GateKind::H, GateKind::Cnot], vec![GateKind::Cz, GateKind::I]],
        )
        .unwrap();
        assert_eq!(layered, expected);
    }

    #[test]
    fn layerize_rejects_single_qubit() {
        assert!(matches!(layerize(&FreeCircuit { n: 1, m: 0, gates: vec![] }), Err(Error::TooFewQubits(1))));
    }

    #[test]
    fn gate_locations() {
        let c = LayeredCircuit::from_kinds(3, 1, &[vec![GateKind::I, GateKind::I], vec![GateKind::Cnot, GateKind::Swap]]).unwrap();
        assert_eq!(gate_at_location(&c, 2).unwrap().kind, GateKind::I);
        assert_eq!(gate_at_location(&c, 8).unwrap().kind, GateKind::Cnot);
        assert_eq!(gate_at_location(&c, 10).unwrap().kind, GateKind::Swap);
        assert!(matches!(gate_at_location(&c, 7), Err(Error::NotTypeB { .. })));
        // D location between the blocks
        assert!(gate_at_location(&c, 6).is_err());
    }

    #[test]
    fn slot_map_is_bijection_onto_even_non_boundary_pairs() {
        for n in 2..6 {
            for rounds in 1..4 {
                let mut hits = 0;
                for i in 1..2 * n * rounds {
                    let type_b = i % 2 == 0 && i % (2 * n) != 0;
                    match location_to_slot(n, rounds, i) {
                        Ok((r, g)) => {
                            assert!(type_b);
                            assert_eq!(slot_to_location(n, r, g), i);
                            hits += 1;
                        }
                        Err(_) => assert!(!type_b),
                    }
                }
                assert_eq!(hits, rounds * (n - 1));
            }
        }
    }
}
