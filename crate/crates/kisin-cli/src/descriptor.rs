//! JSON descriptors → domain objects, with field-level diagnostics.
//!
//! Unknown fields are collected as warnings (forward compatibility); missing
//! or ill-typed fields produce schema errors naming the offending path.
//! Defaults when a field is absent: p = 2, k = F_2, N = 6, M = 64, P = u + 2.

use kisin::coeffs::{CoeffParams, WittElem};
use kisin::error::Error;
use kisin::phimod::{PhiModule, SMat, TorsionPhiModule};
use kisin::series::{EisensteinP, SeriesS};
use kisin::galois::HomRingSpec;
use serde_json::Value;
use std::sync::Arc;

pub struct ParsedModule {
    pub module: PhiModule,
    pub pe: EisensteinP,
    pub m: usize,
    pub warnings: Vec<String>,
}

pub struct ParsedContext {
    pub params: Arc<CoeffParams>,
    pub pe: EisensteinP,
    pub m: usize,
    pub warnings: Vec<String>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn as_obj<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>, Error> {
    v.as_object()
        .ok_or_else(|| schema(format!("'{path}' must be an object")))
}

fn get_u64(obj: &serde_json::Map<String, Value>, key: &str, default: Option<u64>) -> Result<u64, Error> {
    match obj.get(key) {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| schema(format!("field '{key}' must be a nonnegative integer"))),
        None => default.ok_or_else(|| schema(format!("missing field '{key}'"))),
    }
}

/// A Witt coefficient: either a bare integer (residue degree 1 shorthand) or
/// a coordinate vector.
fn parse_witt(v: &Value, params: &Arc<CoeffParams>, path: &str) -> Result<WittElem, Error> {
    match v {
        Value::Number(n) => {
            let c = n
                .as_u64()
                .ok_or_else(|| schema(format!("'{path}': coefficient must be a nonnegative integer")))?;
            if params.r() != 1 {
                let mut coords = vec![0u64; params.r()];
                coords[0] = c;
                return params.from_coords(&coords).map_err(|e| schema(format!("'{path}': {e}")));
            }
            Ok(params.from_u64(c))
        }
        Value::Array(arr) => {
            let coords: Vec<u64> = arr
                .iter()
                .map(|x| {
                    x.as_u64()
                        .ok_or_else(|| schema(format!("'{path}': coordinates must be integers")))
                })
                .collect::<Result<_, _>>()?;
            params
                .from_coords(&coords)
                .map_err(|e| schema(format!("'{path}': {e}")))
        }
        _ => Err(schema(format!("'{path}' must be an integer or coordinate array"))),
    }
}

/// A series: either a bare array of coefficients or {"coeffs": [...], ...}.
pub fn parse_series(
    v: &Value,
    params: &Arc<CoeffParams>,
    m: usize,
    path: &str,
) -> Result<SeriesS, Error> {
    let coeffs_val = match v {
        Value::Array(_) => v,
        Value::Object(obj) => obj
            .get("coeffs")
            .ok_or_else(|| schema(format!("'{path}': missing field 'coeffs'")))?,
        _ => return Err(schema(format!("'{path}' must be a series (array or object)"))),
    };
    let arr = coeffs_val
        .as_array()
        .ok_or_else(|| schema(format!("'{path}.coeffs' must be an array")))?;
    if arr.len() > m {
        return Err(schema(format!(
            "'{path}': series has {} coefficients, u-precision is {m}",
            arr.len()
        )));
    }
    let mut s = SeriesS::zero(params, m);
    for (i, cv) in arr.iter().enumerate() {
        s.set_coeff(i, parse_witt(cv, params, &format!("{path}[{i}]"))?);
    }
    Ok(s)
}

const KNOWN_MODULE_FIELDS: &[&str] = &["p", "k", "N", "M", "P", "rank", "A", "h", "exponents"];

/// Parses the shared context (coefficients, Eisenstein polynomial, precision)
/// from a descriptor object.
pub fn parse_context(input: &Value) -> Result<ParsedContext, Error> {
    let obj = as_obj(input, "input")?;
    let mut warnings = Vec::new();
    for key in obj.keys() {
        if !KNOWN_MODULE_FIELDS.contains(&key.as_str()) {
            warnings.push(format!("unknown field '{key}' ignored"));
        }
    }
    let p = get_u64(obj, "p", Some(2))?;
    let n = get_u64(obj, "N", Some(6))? as u32;
    let m = get_u64(obj, "M", Some(64))? as usize;
    let (r, fpoly) = match obj.get("k") {
        None => (1usize, None),
        Some(kv) => {
            let kobj = as_obj(kv, "k")?;
            let r = get_u64(kobj, "r", Some(1))? as usize;
            let f = match kobj.get("f") {
                None => None,
                Some(Value::Array(arr)) => Some(
                    arr.iter()
                        .map(|x| {
                            x.as_u64()
                                .ok_or_else(|| schema("'k.f' entries must be integers"))
                        })
                        .collect::<Result<Vec<u64>, _>>()?,
                ),
                Some(_) => return Err(schema("'k.f' must be an array of integers")),
            };
            (r, f)
        }
    };
    let params = match fpoly {
        Some(f) => CoeffParams::with_poly(p, r, n, f).map_err(|e| schema(format!("'k.f': {e}")))?,
        None => CoeffParams::new(p, r, n).map_err(|e| schema(format!("'k': {e}")))?,
    };
    let pe = match obj.get("P") {
        None => return Err(schema("missing field 'P'")),
        Some(Value::Array(arr)) => {
            let coeffs: Vec<WittElem> = arr
                .iter()
                .enumerate()
                .map(|(i, cv)| parse_witt(cv, &params, &format!("P[{i}]")))
                .collect::<Result<_, _>>()?;
            EisensteinP::new(coeffs).map_err(|e| schema(format!("'P': {e}")))?
        }
        Some(_) => return Err(schema("'P' must be an array of coefficients")),
    };
    Ok(ParsedContext {
        params,
        pe,
        m,
        warnings,
    })
}

/// Parses a φ-module descriptor {p, k, N, M, P, rank, A, h}.
pub fn parse_module(input: &Value) -> Result<ParsedModule, Error> {
    let ctx = parse_context(input)?;
    let obj = as_obj(input, "input")?;
    let rank = get_u64(obj, "rank", None)? as usize;
    let h = get_u64(obj, "h", Some(1))? as usize;
    let a_val = obj.get("A").ok_or_else(|| schema("missing field 'A'"))?;
    let rows = a_val
        .as_array()
        .ok_or_else(|| schema("'A' must be an array of rows"))?;
    if rows.len() != rank {
        return Err(schema(format!(
            "'A' has {} rows, expected rank {rank}",
            rows.len()
        )));
    }
    let mut a = SMat::zero(&ctx.params, ctx.m, rank, rank);
    for (i, rv) in rows.iter().enumerate() {
        let row = rv
            .as_array()
            .ok_or_else(|| schema(format!("'A[{i}]' must be an array")))?;
        if row.len() != rank {
            return Err(schema(format!(
                "'A[{i}]' has {} entries, expected {rank}",
                row.len()
            )));
        }
        for (j, ev) in row.iter().enumerate() {
            a.set(
                i,
                j,
                parse_series(ev, &ctx.params, ctx.m, &format!("A[{i}][{j}]"))?,
            );
        }
    }
    let module =
        PhiModule::new(a, ctx.pe.clone(), h).map_err(|e| schema(format!("module: {e}")))?;
    Ok(ParsedModule {
        module,
        pe: ctx.pe,
        m: ctx.m,
        warnings: ctx.warnings,
    })
}

/// Parses a sum-form torsion descriptor: a module descriptor plus
/// 'exponents' (p-power exponents of the summands).
pub fn parse_torsion(input: &Value) -> Result<(TorsionPhiModule, ParsedModule), Error> {
    let parsed = parse_module(input)?;
    let obj = as_obj(input, "input")?;
    let exps = match obj.get("exponents") {
        Some(Value::Array(arr)) => arr
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|v| v as u32)
                    .ok_or_else(|| schema("'exponents' entries must be integers"))
            })
            .collect::<Result<Vec<u32>, _>>()?,
        Some(_) => return Err(schema("'exponents' must be an array")),
        None => vec![1; parsed.module.rank()],
    };
    let t = TorsionPhiModule::Sum {
        exponents: exps,
        matrix: parsed.module.matrix().clone(),
        pe: parsed.pe.clone(),
    };
    Ok((t, parsed))
}

/// Parses the hom-counting ring spec from the options object.
pub fn parse_ring_spec(options: &Value) -> Result<HomRingSpec, Error> {
    let mut spec = HomRingSpec::default();
    let Some(robj) = options.get("ring") else {
        return Ok(spec);
    };
    let robj = as_obj(robj, "options.ring")?;
    if let Some(d) = robj.get("ext_degree") {
        spec.ext_degree = d
            .as_u64()
            .ok_or_else(|| schema("'ring.ext_degree' must be an integer"))? as usize;
    }
    if let Some(d) = robj.get("ram") {
        spec.ram = d
            .as_u64()
            .ok_or_else(|| schema("'ring.ram' must be an integer"))? as usize;
    }
    if let Some(wv) = robj.get("as_w") {
        let arr = wv
            .as_array()
            .ok_or_else(|| schema("'ring.as_w' must be an array of [degree, coeff] pairs"))?;
        let mut w = Vec::new();
        for pair in arr {
            let pv = pair
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| schema("'ring.as_w' entries must be [degree, coeff]"))?;
            let d = pv[0]
                .as_i64()
                .ok_or_else(|| schema("'ring.as_w' degree must be an integer"))?;
            let c = pv[1]
                .as_u64()
                .ok_or_else(|| schema("'ring.as_w' coefficient must be an integer"))?;
            w.push((d, c));
        }
        spec.as_w = Some(w);
    }
    Ok(spec)
}

// ---------------------------------------------------------------------------
// serialization back to JSON
// ---------------------------------------------------------------------------

pub fn witt_json(w: &WittElem) -> Value {
    Value::Array(
        w.coords()
            .iter()
            .map(|&c| Value::Number(serde_json::Number::from(c)))
            .collect(),
    )
}

pub fn series_json(s: &SeriesS) -> Value {
    let coeffs: Vec<Value> = s.coeffs().iter().map(witt_json).collect();
    serde_json::json!({
        "coeffs": coeffs,
        "N": s.params().n(),
        "M": s.m(),
    })
}

pub fn smat_json(a: &SMat) -> Value {
    Value::Array(
        (0..a.rows())
            .map(|i| {
                Value::Array(
                    (0..a.cols())
                        .map(|j| series_json(a.get(i, j)))
                        .collect(),
                )
            })
            .collect(),
    )
}
