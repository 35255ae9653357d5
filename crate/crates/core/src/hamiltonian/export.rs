//! Term-list export (JSON lines) and full-matrix coordinate export.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use super::{Couplings, Family, HamiltonianSpec, LocalBasis, LocalTerm, PropPart};
use crate::chain::LocationType;
use crate::error::{Error, Result};
use crate::spectra::{FullOperator, FULL_DIM_LIMIT};

fn term_record(t: &LocalTerm) -> Value {
    let entries: Vec<Value> = t.entries.iter().map(|&(r, c, v)| json!([r, c, v.re, v.im])).collect();
    json!({
        "family": t.family.name(),
        "rule": t.rule,
        "part": t.part.map(|p| match p {
            PropPart::Projector => "projector",
            PropPart::Transition => "transition",
        }),
        "location": t.location.map(|l| l.letter().to_string()),
        "anchor": t.anchor,
        "sites": t.sites,
        "weight": t.weight,
        "entries": entries,
    })
}

/// One header line `{n, R, K, couplings, basis}`, then one line per term.
pub fn export_terms(h: &HamiltonianSpec) -> String {
    let header = json!({
        "n": h.n,
        "R": h.rounds,
        "K": h.k,
        "couplings": {"j_in": h.couplings.j_in, "j_prop": h.couplings.j_prop, "j_pen": h.couplings.j_pen},
        "basis": LocalBasis::LABELS,
        "terms": h.terms.len(),
    });
    let mut out = header.to_string();
    out.push('\n');
    for t in &h.terms {
        out.push_str(&term_record(t).to_string());
        out.push('\n');
    }
    out
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("missing field {key:?}")))
}

fn as_usize(v: &Value, key: &str) -> Result<usize> {
    field(v, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("field {key:?} is not a non-negative integer")))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    field(v, key)?.as_f64().ok_or_else(|| Error::Parse(format!("field {key:?} is not a number")))
}

fn parse_term(v: &Value) -> Result<LocalTerm> {
    let family = field(v, "family")?
        .as_str()
        .and_then(Family::from_name)
        .ok_or_else(|| Error::Parse("unknown term family".into()))?;
    let rule = field(v, "rule")?.as_u64().map(|r| r as u8);
    let part = match v.get("part").and_then(Value::as_str) {
        Some("projector") => Some(PropPart::Projector),
        Some("transition") => Some(PropPart::Transition),
        Some(other) => return Err(Error::Parse(format!("unknown term part {other:?}"))),
        None => None,
    };
    let location = match v.get("location").and_then(Value::as_str) {
        Some(s) => Some(
            LocationType::ALL
                .into_iter()
                .find(|l| l.letter().to_string() == s)
                .ok_or_else(|| Error::Parse(format!("unknown location type {s:?}")))?,
        ),
        None => None,
    };
    let sites: Vec<usize> = field(v, "sites")?
        .as_array()
        .ok_or_else(|| Error::Parse("sites must be a list".into()))?
        .iter()
        .map(|s| s.as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse("bad site".into())))
        .collect::<Result<_>>()?;
    if sites.is_empty() || sites.len() > 2 || (sites.len() == 2 && sites[1] != sites[0] + 1) {
        return Err(Error::Parse(format!("term sites {sites:?} are not one site or an adjacent pair")));
    }
    let dim = if sites.len() == 1 { 8 } else { 64 };
    let mut entries = Vec::new();
    for e in field(v, "entries")?.as_array().ok_or_else(|| Error::Parse("entries must be a list".into()))? {
        let e = e.as_array().filter(|e| e.len() == 4).ok_or_else(|| Error::Parse("entry must be [row, col, re, im]".into()))?;
        let r = e[0].as_u64().filter(|&r| (r as usize) < dim).ok_or_else(|| Error::Parse("bad entry row".into()))?;
        let c = e[1].as_u64().filter(|&c| (c as usize) < dim).ok_or_else(|| Error::Parse("bad entry column".into()))?;
        let re = e[2].as_f64().ok_or_else(|| Error::Parse("bad entry value".into()))?;
        let im = e[3].as_f64().ok_or_else(|| Error::Parse("bad entry value".into()))?;
        entries.push((r as u8, c as u8, C64::new(re, im)));
    }
    Ok(LocalTerm { family, rule, part, location, anchor: as_usize(v, "anchor")?, sites, weight: as_f64(v, "weight")?, entries })
}

/// Inverse of [`export_terms`].
pub fn parse_terms(text: &str) -> Result<HamiltonianSpec> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Value = serde_json::from_str(lines.next().ok_or_else(|| Error::Parse("empty export".into()))?)
        .map_err(|e| Error::Parse(format!("header: {e}")))?;
    let n = as_usize(&header, "n")?;
    let rounds = as_usize(&header, "R")?;
    let k = as_usize(&header, "K")?;
    let c = field(&header, "couplings")?;
    let couplings = Couplings { j_in: as_f64(c, "j_in")?, j_prop: as_f64(c, "j_prop")?, j_pen: as_f64(c, "j_pen")? };
    let mut terms = Vec::new();
    for (no, line) in lines.enumerate() {
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse(format!("term {no}: {e}")))?;
        let t = parse_term(&v)?;
        if t.sites.iter().any(|&s| s == 0 || s > 2 * n * rounds) {
            return Err(Error::ShapeMismatch(format!("term {no} lies outside the chain")));
        }
        terms.push(t);
    }
    if let Some(expected) = header.get("terms").and_then(Value::as_u64) {
        if expected as usize != terms.len() {
            return Err(Error::Parse(format!("header announces {expected} terms, found {}", terms.len())));
        }
    }
    Ok(HamiltonianSpec { n, rounds, k, couplings, terms })
}

/// Writes `row col re im` (0-based, sorted) for every nonzero of the full
/// matrix. Only for `8^N <= 2^24`.
pub fn export_coo(h: &HamiltonianSpec, out: &mut dyn Write) -> Result<()> {
    if h.sites() > 8 {
        return Err(Error::DimensionTooLarge { dim: usize::MAX, limit: FULL_DIM_LIMIT });
    }
    let op = FullOperator::new(h)?;
    let dim = 1usize << (3 * h.sites());
    let mut buf = std::io::BufWriter::new(out);
    for row in 0..dim {
        for (col, v) in op.row(row) {
            writeln!(buf, "{row} {col} {:e} {:e}", v.re, v.im)?;
        }
    }
    buf.flush()?;
    Ok(())
}
