//! Batch front-end: JSON job descriptors in, JSON reports out.
//!
//! A job is {"command": ..., "input": {...}, "options": {...}}; a file may
//! also hold {"jobs": [...]} for a batch. Reports are deterministic given the
//! descriptor and library version (keys are sorted, a version stamp is the
//! only environment-dependent field). Exit codes: 0 pass, 2 mathematical
//! failure, 3 precision failure, 4 schema failure; for batches the worst
//! outcome wins.

#![allow(clippy::needless_range_loop)] // indexed loops mirror the matrix algebra

mod descriptor;

use clap::Parser;
use descriptor::*;
use kisin::breuil;
use kisin::error::Error;
use kisin::galois;
use kisin::phimod::{ModuleMap, SMat};
use kisin::sring::SParams;
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kisin", version, about = "φ-module calculations over W(k)[[u]]")]
struct Args {
    /// Input JSON file (a single job or {"jobs": [...]}).
    #[arg(long)]
    input: PathBuf,
    /// Output file for the report (atomic write); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for batch inputs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Seed echoed into reports, for reproducing randomized suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code_of(err: &Error) -> i32 {
    match err {
        Error::Schema(_) => 4,
        Error::Precision(_) | Error::NonConvergence { .. } => 3,
        _ => 2,
    }
}

fn status_of(code: i32) -> &'static str {
    match code {
        0 => "ok",
        2 => "math-error",
        3 => "precision-error",
        _ => "schema-error",
    }
}

fn main() {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.input.display());
            std::process::exit(4);
        }
    };
    let root: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            let report = json!({
                "status": "schema-error",
                "error": format!("malformed JSON: {e}"),
                "version": env!("CARGO_PKG_VERSION"),
            });
            emit(&args, &report);
            std::process::exit(4);
        }
    };
    let (report, code) = if let Some(jobs) = root.get("jobs") {
        run_batch(jobs, &args)
    } else {
        let (r, c) = run_job(&root, args.seed);
        (r, c)
    };
    emit(&args, &report);
    std::process::exit(code);
}

fn emit(args: &Args, report: &Value) {
    let text = serde_json::to_string_pretty(report).expect("report serialization");
    match &args.output {
        Some(path) => write_atomic(path, &text),
        None => println!("{text}"),
    }
}

fn write_atomic(path: &PathBuf, text: &str) {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).expect("create temp output");
    f.write_all(text.as_bytes()).expect("write output");
    f.write_all(b"\n").expect("write output");
    drop(f);
    std::fs::rename(&tmp, path).expect("atomic rename");
}

fn run_batch(jobs: &Value, args: &Args) -> (Value, i32) {
    let Some(list) = jobs.as_array() else {
        return (
            json!({
                "status": "schema-error",
                "error": "'jobs' must be an array",
                "version": env!("CARGO_PKG_VERSION"),
            }),
            4,
        );
    };
    let workers = args.jobs.max(1).min(list.len().max(1));
    let results: Vec<(Value, i32)> = if workers <= 1 {
        list.iter().map(|j| run_job(j, args.seed)).collect()
    } else {
        // static round-robin split; reports keep input order
        let mut out: Vec<Option<(Value, i32)>> = vec![None; list.len()];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let list = &list;
                let seed = args.seed;
                handles.push(scope.spawn(move || {
                    let mut part = Vec::new();
                    for (i, job) in list.iter().enumerate() {
                        if i % workers == w {
                            part.push((i, run_job(job, seed)));
                        }
                    }
                    part
                }));
            }
            for h in handles {
                for (i, r) in h.join().expect("worker") {
                    out[i] = Some(r);
                }
            }
        });
        out.into_iter().map(|x| x.unwrap()).collect()
    };
    let code = results.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let reports: Vec<Value> = results.into_iter().map(|(r, _)| r).collect();
    (
        json!({
            "reports": reports,
            "version": env!("CARGO_PKG_VERSION"),
        }),
        code,
    )
}

fn run_job(job: &Value, seed: u64) -> (Value, i32) {
    let command = job
        .get("command")
        .and_then(|c| c.as_str())
        .unwrap_or("")
        .to_string();
    let input = job.get("input").cloned().unwrap_or(Value::Null);
    let options = job.get("options").cloned().unwrap_or(json!({}));
    let outcome = dispatch(&command, &input, &options);
    let (result, warnings, code, error) = match outcome {
        Ok((result, warnings)) => (result, warnings, 0, None),
        Err(e) => (Value::Null, Vec::new(), exit_code_of(&e), Some(e.to_string())),
    };
    // every report carries the effective p-precision the op consumed; ops
    // that divide by p report less than N, the rest report N itself
    let eff = result
        .get("eff_n_used")
        .or_else(|| result.get("eff_N_used"))
        .cloned()
        .unwrap_or_else(|| {
            input
                .get("N")
                .cloned()
                .unwrap_or_else(|| json!(6))
        });
    let mut report = json!({
        "command": command,
        "status": status_of(code),
        "result": result,
        "eff_n_used": eff,
        "warnings": warnings,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    if let Some(err) = error {
        report["error"] = Value::String(err);
    }
    // per-job output override
    if let Some(path) = job.get("output").and_then(|p| p.as_str()) {
        let text = serde_json::to_string_pretty(&report).expect("report serialization");
        write_atomic(&PathBuf::from(path), &text);
    }
    (report, code)
}

type JobResult = Result<(Value, Vec<String>), Error>;

fn dispatch(command: &str, input: &Value, options: &Value) -> JobResult {
    match command {
        "validate" => cmd_validate(input),
        "classify" => cmd_classify(input),
        "dual" => cmd_dual(input),
        "conn-et" => cmd_conn_et(input),
        "mult-unip" => cmd_mult_unip(input),
        "trivialize" => cmd_trivialize(input, options),
        "breuil" => cmd_breuil(input, options),
        "galois-etale" => cmd_galois_etale(input, options),
        "galois-mult" => cmd_galois_mult(input, options),
        "homcount" => cmd_homcount(input, options),
        "demo-2adic" => cmd_demo_2adic(input),
        "transport-exact" => cmd_transport(input),
        "" => Err(Error::Schema("missing field 'command'".into())),
        other => Err(Error::Schema(format!("unknown command '{other}'"))),
    }
}

fn opt_u64(options: &Value, key: &str, default: u64) -> u64 {
    options.get(key).and_then(|v| v.as_u64()).unwrap_or(default)
}

fn wmat_json(w: &kisin::zplin::WMatrix) -> Value {
    Value::Array(
        (0..w.n())
            .map(|i| {
                Value::Array((0..w.n()).map(|j| witt_json(w.get(i, j))).collect())
            })
            .collect(),
    )
}

fn cmd_validate(input: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let validated = parsed.module.validated()?;
    Ok((
        json!({
            "valid": true,
            "rank": validated.rank(),
            "h": validated.h(),
            "V": smat_json(validated.verschiebung().unwrap()),
            "v_u_prec": validated.v_u_prec(),
        }),
        parsed.warnings,
    ))
}

fn cmd_classify(input: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let flags = parsed.module.classify()?;
    Ok((
        json!({
            "etale": flags.etale,
            "multiplicative": flags.multiplicative,
            "nilpotent": flags.nilpotent,
            "unipotent": flags.unipotent,
        }),
        parsed.warnings,
    ))
}

fn cmd_dual(input: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let dual = parsed.module.dual()?;
    Ok((
        json!({
            "A": smat_json(dual.matrix()),
        }),
        parsed.warnings,
    ))
}

fn cmd_conn_et(input: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let dec = parsed.module.connected_etale()?;
    Ok((
        json!({
            "sub_rank": dec.sub.rank(),
            "quotient_rank": dec.quotient.rank(),
            "sub_A": smat_json(dec.sub.matrix()),
            "quotient_A": smat_json(dec.quotient.matrix()),
            "sub_map": smat_json(&dec.sub_map.matrix),
            "transform": smat_json(&dec.transform),
            "sub_etale": dec.sub.classify()?.etale,
            "quotient_nilpotent": dec.quotient.classify()?.nilpotent,
        }),
        parsed.warnings,
    ))
}

fn cmd_mult_unip(input: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let dec = parsed.module.mult_unipotent()?;
    Ok((
        json!({
            "sub_rank": dec.sub.rank(),
            "quotient_rank": dec.quotient.rank(),
            "sub_A": smat_json(dec.sub.matrix()),
            "quotient_A": smat_json(dec.quotient.matrix()),
            "sub_map": smat_json(&dec.sub_map.matrix),
            "sub_unipotent": dec.sub.classify()?.unipotent,
            "quotient_multiplicative": dec.quotient.classify()?.multiplicative,
        }),
        parsed.warnings,
    ))
}

fn cmd_trivialize(input: &Value, options: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let budget = opt_u64(options, "budget", 6) as usize;
    let t = parsed.module.trivialize_etale(budget)?;
    Ok((
        json!({
            "ext_degree": t.ext_degree,
            "k_ext": {"r": t.ext.r(), "f": t.ext.poly()},
            "iterations": t.iterations,
            "U": smat_json(&t.u),
            "residual_identity": true,
        }),
        parsed.warnings,
    ))
}

fn cmd_breuil(input: &Value, options: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let sp = SParams::new(parsed.pe.clone(), parsed.m)?;
    let b = breuil::build_breuil(&parsed.module, &sp)?;
    let rep = breuil::check_strong_divisibility(&b);
    if !rep.pass() {
        return Err(Error::Height(format!(
            "strong divisibility failed: {:?}",
            rep.failures
        )));
    }
    let m_n = opt_u64(options, "m_n", 32.min(parsed.m as u64)) as usize;
    let mono = breuil::compute_n(&b, m_n, None)?;
    let n_values: Vec<Value> = mono
        .n_values
        .iter()
        .map(|v| {
            Value::Array(
                v.iter()
                    .map(|x| {
                        json!({
                            "coeffs": x.coeffs().iter().map(witt_json).collect::<Vec<_>>(),
                            "divided": true,
                            "eff_N": x.eff_n(),
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    Ok((
        json!({
            "fil1_rank_profile": {
                "generators": b.fil1_gens.len(),
                "pivot_valuations": b.fil1_pivot_vals,
            },
            "strong_divisibility": "pass",
            "griffiths_residual_order": mono.residual_order,
            "monodromy_iterations": mono.iterations,
            "n_in_i0": mono.in_i0,
            "N_values": n_values,
            "eff_n_used": b.eff_n(),
        }),
        parsed.warnings,
    ))
}

fn cmd_galois_etale(input: &Value, options: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let budget = opt_u64(options, "budget", 6) as usize;
    let rep = galois::unramified_rep(&parsed.module, budget)?;
    Ok((
        json!({
            "rank": rep.rank,
            "ext_degree": rep.ext_degree,
            "k_ext": {"r": rep.ext.r(), "f": rep.ext.poly()},
            "C": wmat_json(&rep.c),
        }),
        parsed.warnings,
    ))
}

fn cmd_galois_mult(input: &Value, options: &Value) -> JobResult {
    let parsed = parse_module(input)?;
    let budget = opt_u64(options, "budget", 6) as usize;
    let (rep, twist) = galois::rep_multiplicative(&parsed.module, budget)?;
    Ok((
        json!({
            "rank": rep.rank,
            "ext_degree": rep.ext_degree,
            "k_ext": {"r": rep.ext.r(), "f": rep.ext.poly()},
            "C": wmat_json(&rep.c),
            "twist": twist.0,
        }),
        parsed.warnings,
    ))
}

fn cmd_homcount(input: &Value, options: &Value) -> JobResult {
    let (torsion, parsed) = parse_torsion(input)?;
    let ring = parse_ring_spec(options)?;
    let window = opt_u64(options, "window", 16) as usize;
    let hc = galois::modp_hom_count(&torsion, &ring, window)?;
    Ok((
        json!({
            "count": hc.count,
            "exponent": hc.exponent,
            "expected_exponent": hc.expected_exponent,
            "ring_too_small": hc.ring_too_small,
            "stability_levels": hc.levels
                .iter()
                .map(|(w, d)| json!({"window": w, "dimension": d}))
                .collect::<Vec<_>>(),
        }),
        parsed.warnings,
    ))
}

fn cmd_demo_2adic(input: &Value) -> JobResult {
    let ctx = parse_context(input)?;
    if ctx.params.n() < 2 {
        return Err(Error::Schema("demo-2adic needs N >= 2".into()));
    }
    if ctx.m < 2 * ctx.pe.e() + 1 {
        return Err(Error::Schema(format!(
            "demo-2adic needs M >= 2e+1 = {}",
            2 * ctx.pe.e() + 1
        )));
    }
    let cert = galois::two_adic_discrepancy(&ctx.pe, ctx.m)?;
    let w_coeffs: Vec<Value> = cert
        .w
        .support()
        .map(|(d, c)| json!([d, c.coords()]))
        .collect();
    Ok((
        json!({
            "e": cert.e,
            "alpha": witt_json(&cert.alpha),
            "beta": witt_json(&cert.beta),
            "c": cert.c_coeffs.iter().map(witt_json).collect::<Vec<_>>(),
            "mod2": {"valuation": cert.mod2_valuation, "vanishes": cert.mod2_vanishes},
            "mod4": {
                "dp_coordinate_index": cert.mod4_dp_index,
                "value": cert.mod4_dp_coordinate,
                "nonzero": cert.mod4_nonzero,
            },
            "relation": {"w": w_coeffs},
            "congruence_checked": cert.congruence_checked,
            "eff_N_used": cert.eff_n_used,
        }),
        ctx.warnings,
    ))
}

fn cmd_transport(input: &Value) -> JobResult {
    let obj = input
        .as_object()
        .ok_or_else(|| Error::Schema("'input' must be an object".into()))?;
    let ctx = parse_context(input)?;
    let mut warnings = ctx.warnings.clone();
    let parse_sub = |key: &str| -> Result<kisin::phimod::PhiModule, Error> {
        let v = obj
            .get(key)
            .ok_or_else(|| Error::Schema(format!("missing field '{key}'")))?;
        let sobj = v
            .as_object()
            .ok_or_else(|| Error::Schema(format!("'{key}' must be an object")))?;
        let rank = sobj
            .get("rank")
            .and_then(|r| r.as_u64())
            .ok_or_else(|| Error::Schema(format!("missing field '{key}.rank'")))? as usize;
        let rows = sobj
            .get("A")
            .and_then(|a| a.as_array())
            .ok_or_else(|| Error::Schema(format!("missing field '{key}.A'")))?;
        let mut a = SMat::zero(&ctx.params, ctx.m, rank, rank);
        for (i, rv) in rows.iter().enumerate() {
            let row = rv
                .as_array()
                .ok_or_else(|| Error::Schema(format!("'{key}.A[{i}]' must be an array")))?;
            for (j, ev) in row.iter().enumerate() {
                a.set(
                    i,
                    j,
                    parse_series(ev, &ctx.params, ctx.m, &format!("{key}.A[{i}][{j}]"))?,
                );
            }
        }
        kisin::phimod::PhiModule::new(a, ctx.pe.clone(), 1)?.validated()
    };
    let sub = parse_sub("sub")?;
    let mid = parse_sub("mid")?;
    let quot = parse_sub("quotient")?;
    let parse_map = |key: &str, rows_n: usize, cols_n: usize| -> Result<SMat, Error> {
        let rows = obj
            .get(key)
            .and_then(|a| a.as_array())
            .ok_or_else(|| Error::Schema(format!("missing field '{key}'")))?;
        let mut a = SMat::zero(&ctx.params, ctx.m, rows_n, cols_n);
        for (i, rv) in rows.iter().enumerate() {
            let row = rv
                .as_array()
                .ok_or_else(|| Error::Schema(format!("'{key}[{i}]' must be an array")))?;
            for (j, ev) in row.iter().enumerate() {
                a.set(
                    i,
                    j,
                    parse_series(ev, &ctx.params, ctx.m, &format!("{key}[{i}][{j}]"))?,
                );
            }
        }
        Ok(a)
    };
    let iota = ModuleMap::new(
        sub.clone(),
        mid.clone(),
        parse_map("iota", mid.rank(), sub.rank())?,
    )?;
    let proj = ModuleMap::new(
        mid.clone(),
        quot.clone(),
        parse_map("pi", quot.rank(), mid.rank())?,
    )?;
    let sp = SParams::new(ctx.pe.clone(), ctx.m)?;
    let rep = breuil::transport_exactness(&iota, &proj, &sp)?;
    let result = json!({
        "pass": rep.pass(),
        "equivariant": rep.equivariant,
        "composite_zero": rep.composite_zero,
        "exact_saturated": rep.exact_saturated,
        "s_level_exact": rep.s_level_exact,
        "fil1_surjective": rep.fil1_surjective,
        "detail": rep.detail,
    });
    if !rep.pass() {
        warnings.push("sequence failed exactness transport".into());
        return Err(Error::Height(format!(
            "exactness transport failed: {:?}",
            rep.detail
        )));
    }
    Ok((result, warnings))
}
