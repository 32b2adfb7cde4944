use std::path::Path;

use hanner_core::asymptotics::{
    bound_envelope, fit_exponent, flm_report, scan, Delta, ScanRow, ENVELOPE_GOLDEN,
};
use hanner_core::geometry::{
    build_polytope, f_vector_crosscheck, face_lattice, radii, radii_recursion,
};
use hanner_core::phi::{compose_window, parse_word, word_string};
use hanner_core::schedule::window_profile;
use hanner_core::selftest;
use hanner_core::trees::{lower_bound_report, preorder_encode, tree_sum_check};
use hanner_core::{face_numbers, DensityParam, EngineKind, Error, PhiMap, Schedule};
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::args::{Command, Format};

/// How a command that ran to completion should exit.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A verification or tolerance check failed (exit 2).
    Failed(String),
    /// A cross-check failure reported as a precondition error (exit 3).
    Rejected(String),
}

pub struct Report {
    pub stdout: String,
    pub stderr: String,
    pub status: Status,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report {
            stdout,
            stderr: String::new(),
            status: Status::Ok,
        }
    }

    fn check(stdout: String, passed: bool, why: impl Into<String>) -> Self {
        let status = if passed {
            Status::Ok
        } else {
            Status::Failed(why.into())
        };
        Report {
            stdout,
            stderr: String::new(),
            status,
        }
    }
}

type Result<T> = std::result::Result<T, Error>;

fn internal(e: impl std::fmt::Display) -> Error {
    Error::Verification(format!("internal: {e}"))
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(&row).map_err(internal)?;
    }
    String::from_utf8(w.into_inner().map_err(internal)?).map_err(internal)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn big(x: &BigUint) -> String {
    x.to_str_radix(10)
}

fn bigs(xs: &[BigUint]) -> Vec<String> {
    xs.iter().map(big).collect()
}

pub fn run(command: Command, format: Format) -> Result<Report> {
    match command {
        Command::Schedule { a, steps, window } => schedule(&a, steps, window, format),
        Command::Fvector { a, n, kmax, engine } => fvector(&a, n, kmax, engine, format),
        Command::Phi {
            word,
            a,
            q,
            m,
            tmax,
        } => phi(word, a, q, m, tmax, format),
        Command::Trees {
            a,
            q,
            m,
            kmax,
            budget,
        } => trees(&a, q, m, kmax, budget, format),
        Command::LowerBound { a, q, m, k } => lower_bound(&a, q, m, k, format),
        Command::Asymptotics {
            a,
            delta,
            nmax,
            nmin,
            engine,
            csv,
            fit_from,
            tolerance,
        } => asymptotics(
            &a,
            delta,
            nmin,
            nmax,
            engine,
            csv.as_deref(),
            fit_from,
            tolerance,
            format,
        ),
        Command::Oracle { a, n, full_lattice } => oracle(&a, n, full_lattice, format),
        Command::FlmReport {
            a,
            delta,
            nmax,
            engine,
            fit_from,
            tolerance,
        } => flm(&a, delta, nmax, engine, fit_from, tolerance, format),
        Command::Selftest => run_selftest(format),
    }
}

fn schedule(a: &DensityParam, steps: usize, window: Option<u32>, format: Format) -> Result<Report> {
    let s = Schedule::new(a, steps)?;
    let kinds: Vec<String> = s.kinds.iter().map(|k| k.letter().to_string()).collect();
    let windows = match window {
        Some(q) => (0..(steps as u64) / q.max(1) as u64)
            .map(|m| window_profile(a, q, m))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let out = match format {
        Format::Csv => {
            let mut out = kinds.join(",");
            out.push('\n');
            if !windows.is_empty() {
                out.push('\n');
                out += &csv_table(
                    &["m", "word", "products"],
                    windows.iter().map(|w| {
                        vec![
                            w.window.m.to_string(),
                            word_string(&w.word),
                            w.window.p.to_string(),
                        ]
                    }),
                )?;
            }
            out
        }
        Format::Json => pretty(&json!({
            "a": a.to_string(),
            "steps": steps,
            "kinds": kinds,
            "windows": windows.iter().map(|w| json!({
                "m": w.window.m,
                "word": word_string(&w.word),
                "products": w.window.p,
            })).collect::<Vec<_>>(),
        })),
    };
    Ok(Report::ok(out))
}

fn fvector(
    a: &DensityParam,
    n: u32,
    kmax: usize,
    engine: EngineKind,
    format: Format,
) -> Result<Report> {
    let state = face_numbers(a, n, kmax, engine)?;
    let values: Vec<String> = match state.exact() {
        Some(p) => bigs(p.coeffs()),
        None => state.log2_coeffs().iter().map(|x| x.to_string()).collect(),
    };
    let column = if engine.is_exact() {
        "coefficient"
    } else {
        "log2_coefficient"
    };
    let out = match format {
        Format::Csv => csv_table(
            &["k", column],
            values
                .iter()
                .enumerate()
                .map(|(k, v)| vec![k.to_string(), v.clone()]),
        )?,
        Format::Json => pretty(&json!({
            "a": a.to_string(),
            "n": n,
            "engine": engine.to_string(),
            "k_max": kmax,
            column: values,
        })),
    };
    Ok(Report::ok(out))
}

fn phi(
    word: Option<String>,
    a: Option<DensityParam>,
    q: Option<u32>,
    m: u64,
    tmax: Option<usize>,
    format: Format,
) -> Result<Report> {
    let map = match (word, a, q) {
        (Some(w), _, _) => {
            let w = parse_word(&w)?;
            compose_window(&w, tmax.unwrap_or(1 << w.len().min(20)))?
        }
        (None, Some(a), Some(q)) => {
            let base = PhiMap::for_window(&a, q, m)?;
            match tmax {
                Some(t) => compose_window(base.word(), t)?,
                None => base,
            }
        }
        _ => return Err(Error::Usage("give --word, or --a with --q".into())),
    };
    let mut rows = Vec::new();
    for (&x, c) in map.terms() {
        for (t, v) in c.coeffs().iter().enumerate() {
            if v.bits() > 0 {
                rows.push(vec![x.to_string(), t.to_string(), big(v)]);
            }
        }
    }
    let out = match format {
        Format::Csv => csv_table(&["x_degree", "t_degree", "coefficient"], rows)?,
        Format::Json => {
            let top = match map.tfree_and_top() {
                Ok(t) => json!({ "A": big(&t.a), "p": t.p, "B": big(&t.b), "lambda": t.lambda }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            pretty(&json!({
                "word": word_string(map.word()),
                "products": map.products(),
                "t_truncation": map.t_truncation(),
                "terms": map.terms().iter().map(|(x, c)| json!({
                    "x_degree": x,
                    "coefficients": bigs(c.coeffs()),
                })).collect::<Vec<_>>(),
                "top": top,
            }))
        }
    };
    Ok(Report::ok(out))
}

fn trees(
    a: &DensityParam,
    q: u32,
    m: u32,
    kmax: usize,
    budget: u64,
    format: Format,
) -> Result<Report> {
    let report = tree_sum_check(a, q, m, kmax, budget)?;
    let mut support: Vec<usize> = (0..m)
        .map(|j| PhiMap::for_window(a, q, (m - 1 - j) as u64).map(|p| p.support()))
        .collect::<Result<Vec<_>>>()?
        .concat();
    support.sort_unstable();
    support.dedup();
    let sep = if support.len() < 9 { "" } else { "." };
    let mut rows = Vec::with_capacity(report.trees.len());
    for (i, rec) in report.trees.iter().enumerate() {
        let word = preorder_encode(&rec.tree, &support)?;
        rows.push(vec![
            i.to_string(),
            word.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(sep),
            rec.stats.leaves.to_string(),
            rec.stats.internal.to_string(),
            rec.stats.atypical.to_string(),
            big(&rec.weight_at_one),
        ]);
    }
    let passed = report.atypical_filter_ok && report.weight_bound_ok && report.internal_bound_ok;
    let out = match format {
        Format::Csv => csv_table(
            &[
                "index",
                "preorder",
                "leaves",
                "internal",
                "atypical",
                "weight_at_one",
            ],
            rows,
        )?,
        Format::Json => pretty(&json!({
            "a": a.to_string(),
            "q": q,
            "m": m,
            "k_max": kmax,
            "trees": report.trees.len(),
            "tree_sum": bigs(report.tree_sum.coeffs()),
            "formula": bigs(&report.formula),
            "engine": bigs(report.engine.coeffs()),
            "atypical_filter_ok": report.atypical_filter_ok,
            "weight_bound_ok": report.weight_bound_ok,
            "internal_bound_ok": report.internal_bound_ok,
        })),
    };
    Ok(Report::check(out, passed, "tree statistics check failed"))
}

fn lower_bound(a: &DensityParam, q: u32, m: u32, k: u64, format: Format) -> Result<Report> {
    let r = lower_bound_report(a, q, m, k)?;
    let c = &r.certificate;
    let out = match format {
        Format::Csv => csv_table(
            &[
                "h",
                "jstar",
                "weight_exponent",
                "leaves",
                "atypical",
                "leaves_exceed_2k",
                "bound_log2",
                "certified_log2",
                "engine_log2",
                "holds",
            ],
            [vec![
                c.h.to_string(),
                c.jstar.to_string(),
                c.weight_exponent.to_string(),
                c.leaves.to_string(),
                c.atypical.to_string(),
                c.leaves_exceed_2k.to_string(),
                c.bound_log2.to_string(),
                r.certified_log2.to_string(),
                r.engine_log2.to_string(),
                r.holds.to_string(),
            ]],
        )?,
        Format::Json => pretty(&serde_json::to_value(&r).map_err(internal)?),
    };
    Ok(Report::check(
        out,
        r.holds,
        "engine value is below the certified lower bound",
    ))
}

fn scan_csv(rows: &[ScanRow]) -> Result<String> {
    csv_table(
        &["n", "d", "k", "Q", "m", "p", "log2_coeff", "rho"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.d.to_string(),
                r.k.to_string(),
                r.q.to_string(),
                r.m.to_string(),
                r.p.to_string(),
                r.log2_coeff.to_string(),
                r.rho.to_string(),
            ]
        }),
    )
}

fn fit_rows(rows: &[ScanRow], nmax: u32, fit_from: Option<u32>) -> Vec<ScanRow> {
    let from = fit_from.unwrap_or(nmax.div_ceil(2));
    rows.iter().filter(|r| r.n >= from).cloned().collect()
}

#[allow(clippy::too_many_arguments)]
fn asymptotics(
    a: &DensityParam,
    delta: Delta,
    nmin: u32,
    nmax: u32,
    engine: EngineKind,
    csv_path: Option<&Path>,
    fit_from: Option<u32>,
    tolerance: f64,
    format: Format,
) -> Result<Report> {
    let rows = scan(a, delta, nmin, nmax, engine)?;
    let fit = fit_exponent(&fit_rows(&rows, nmax, fit_from), a, delta)?;
    let envelope = bound_envelope(&rows, ENVELOPE_GOLDEN);
    let passed = fit.within(tolerance);
    let table = scan_csv(&rows)?;
    if let Some(path) = csv_path {
        std::fs::write(path, &table)
            .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let summary = format!(
        "slope {} target {} deviation {} tolerance {} ({} rows fitted) envelope spread {}\n",
        fit.slope,
        fit.target,
        fit.deviation(),
        tolerance,
        fit.used.len(),
        envelope.spread
    );
    let (stdout, stderr) = match format {
        Format::Csv if csv_path.is_none() => (table, summary),
        Format::Csv => (summary, String::new()),
        Format::Json => (
            pretty(&json!({
                "a": a.to_string(),
                "delta": delta.to_string(),
                "engine": engine.to_string(),
                "rows": rows,
                "fit": fit,
                "envelope": envelope,
                "tolerance": tolerance,
                "passed": passed,
            })),
            String::new(),
        ),
    };
    let mut report = Report::check(
        stdout,
        passed,
        format!(
            "fitted slope {} is outside {} ± {tolerance}",
            fit.slope, fit.target
        ),
    );
    report.stderr = stderr;
    Ok(report)
}

fn oracle(a: &DensityParam, n: u32, full_lattice: bool, format: Format) -> Result<Report> {
    let p = build_polytope(a, n)?;
    let measured = radii(&p);
    let recursed = radii_recursion(a, n)?;
    let mut problems = Vec::new();
    if measured != recursed {
        problems.push(format!(
            "radii {measured:?} differ from the recursion {recursed:?}"
        ));
    }
    if measured.ratio_sq() != 1 << n {
        problems.push(format!("(R/r)² = {} ≠ 2^{n}", measured.ratio_sq()));
    }
    let mut body = json!({
        "a": a.to_string(),
        "n": n,
        "dim": p.dim,
        "vertices": p.vertices.len(),
        "facets": p.facet_normals.len(),
        "R2": measured.r_sq,
        "r_inv_sq": measured.r_inv_sq,
    });
    let mut table = Vec::new();
    if n <= 3 {
        let check = match f_vector_crosscheck(a, n) {
            Ok(c) => c,
            Err(Error::Verification(msg)) => {
                return Ok(Report {
                    stdout: String::new(),
                    stderr: String::new(),
                    status: Status::Rejected(msg),
                })
            }
            Err(e) => return Err(e),
        };
        if !check.passed() {
            problems.push(format!("lattice checks failed: {check:?}"));
        }
        for k in 0..check.dim {
            table.push(vec![
                k.to_string(),
                check.lattice[k].to_string(),
                check.geometric[k].to_string(),
                check.paper[k].to_string(),
            ]);
        }
        body["f_vector"] = json!(check.lattice);
        body["face_total"] = json!(check.face_total);
        body["crosscheck"] = serde_json::to_value(&check).map_err(internal)?;
        if full_lattice {
            body["faces"] = serde_json::to_value(face_lattice(&p)?.faces).map_err(internal)?;
        }
    } else {
        // full lattice is out of reach; compare vertex and facet counts only
        let d = p.dim;
        let geo = face_numbers(a, n, d, EngineKind::GeometricExact)?;
        let f = geo.f_vector().unwrap_or_default();
        let (v, fc) = (
            BigUint::from(p.vertices.len()),
            BigUint::from(p.facet_normals.len()),
        );
        if f.first() != Some(&v) || f.get(d - 1) != Some(&fc) {
            return Ok(Report {
                stdout: String::new(),
                stderr: String::new(),
                status: Status::Rejected(format!(
                    "vertex/facet counts ({v}, {fc}) differ from the geometric engine"
                )),
            });
        }
        body["f_vector"] = Value::Null;
        body["face_total"] = Value::Null;
        if full_lattice {
            return Err(Error::Guard(format!(
                "face lattice of a {d}-dimensional polytope exceeds the guard"
            )));
        }
    }
    let stdout = match format {
        Format::Json => pretty(&body),
        Format::Csv => {
            let mut out = csv_table(&["k", "lattice", "geometric", "paper"], table)?;
            out += &format!("# R2={} r_inv_sq={}\n", measured.r_sq, measured.r_inv_sq);
            out
        }
    };
    let status = if problems.is_empty() {
        Status::Ok
    } else {
        Status::Rejected(problems.join("; "))
    };
    Ok(Report {
        stdout,
        stderr: String::new(),
        status,
    })
}

fn flm(
    a: &DensityParam,
    delta: Delta,
    nmax: u32,
    engine: EngineKind,
    fit_from: Option<u32>,
    tolerance: f64,
    format: Format,
) -> Result<Report> {
    let rows = scan(a, delta, 0, nmax, engine)?;
    let fit = fit_exponent(&fit_rows(&rows, nmax, fit_from), a, delta)?;
    let report = flm_report(a.as_f64(), delta, Some(&fit));
    let passed = fit.within(tolerance);
    let out = match format {
        Format::Json => pretty(&json!({
            "report": report,
            "fit": fit,
            "tolerance": tolerance,
            "passed": passed,
        })),
        Format::Csv => csv_table(
            &[
                "facet_exponent",
                "vertex_exponent",
                "radii_exponent",
                "total",
                "fitted_vertex_exponent",
            ],
            [vec![
                report.facet_exponent.to_string(),
                report.vertex_exponent.to_string(),
                report.radii_exponent.to_string(),
                report.total.to_string(),
                fit.slope.to_string(),
            ]],
        )?,
    };
    Ok(Report::check(
        out,
        passed,
        format!(
            "fitted slope {} is outside {} ± {tolerance}",
            fit.slope, fit.target
        ),
    ))
}

fn run_selftest(format: Format) -> Result<Report> {
    let checks = selftest::run();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    let out = match format {
        Format::Json => pretty(&serde_json::to_value(&checks).map_err(internal)?),
        Format::Csv => csv_table(
            &["check", "passed", "detail"],
            checks
                .iter()
                .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()]),
        )?,
    };
    Ok(Report::check(
        out,
        failed.is_empty(),
        format!("failed: {}", failed.join(", ")),
    ))
}
