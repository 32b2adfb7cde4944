//! Desk-scale invariant suite behind the `selftest` command.

use serde::Serialize;

use crate::asymptotics::{fit_exponent, scan, Delta};
use crate::geometry::{build_polytope, f_vector_crosscheck, radii, radii_recursion};
use crate::phi::{compose_window, parse_word};
use crate::poly::TruncatedIntPolynomial;
use crate::recursion::{face_numbers, verify_growth_bounds, EngineKind};
use crate::schedule::{DensityParam, Schedule};
use crate::trees::{lower_bound_report, tree_sum_check, DEFAULT_BUDGET};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn densities() -> Vec<DensityParam> {
    [(1, 2), (1, 3), (2, 3), (2, 5)]
        .iter()
        .map(|&(p, q)| DensityParam::rational(p, q).unwrap())
        .collect()
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn u64s(p: &TruncatedIntPolynomial, upto: usize) -> Vec<u64> {
    p.coeffs()[..upto]
        .iter()
        .map(|c| u64::try_from(c).unwrap_or(u64::MAX))
        .collect()
}

pub fn run() -> Vec<Check> {
    let half = DensityParam::rational(1, 2).unwrap();
    let delta = Delta::new(1, 2).unwrap();
    vec![
        check("schedule", || {
            let s = Schedule::new(&half, 4)?;
            let letters: String = s.kinds.iter().map(|k| k.letter()).collect();
            Ok((letters == "PHPH", letters))
        }),
        check("engine regression vectors", || {
            let paper = face_numbers(&half, 2, 5, EngineKind::PaperExact)?;
            let geo = face_numbers(&half, 2, 5, EngineKind::GeometricExact)?;
            let (p, g) = (
                u64s(paper.exact().unwrap(), 6),
                u64s(geo.exact().unwrap(), 6),
            );
            Ok((
                p == [8, 24, 34, 24, 8, 1] && g == [8, 24, 32, 16, 1, 0],
                format!("{p:?} {g:?}"),
            ))
        }),
        check("oracle lattice", || {
            let mut ok = true;
            for a in densities() {
                for n in 0..=3 {
                    ok &= f_vector_crosscheck(&a, n)?.passed();
                }
            }
            Ok((ok, "n ≤ 3, four densities".into()))
        }),
        check("radii", || {
            let mut ok = true;
            for a in densities() {
                for n in 0..=4 {
                    ok &= radii(&build_polytope(&a, n)?) == radii_recursion(&a, n)?;
                }
                for n in 0..=16 {
                    ok &= radii_recursion(&a, n)?.ratio_sq() == 1 << n;
                }
            }
            Ok((ok, "(R/r)² = 2^n".into()))
        }),
        check("window map counterexample", || {
            let phi = compose_window(&parse_word("RSR")?, 8)?;
            let c4 = u64s(phi.coefficient(4).unwrap(), 3);
            Ok((c4 == [0, 16, 2], format!("C_4 = {c4:?}")))
        }),
        check("tree sum", || {
            let mut n = 0;
            for a in densities().into_iter().take(3) {
                for (q, m) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)] {
                    let r = tree_sum_check(&a, q, m, 16, DEFAULT_BUDGET)?;
                    if !(r.atypical_filter_ok && r.weight_bound_ok) {
                        return Ok((false, format!("a={a} Q={q} m={m}")));
                    }
                    n += r.trees.len();
                }
            }
            Ok((true, format!("{n} trees")))
        }),
        check("growth bounds", || {
            let mut ok = true;
            for a in densities().into_iter().take(2) {
                for n in [4, 8, 12] {
                    ok &= verify_growth_bounds(&a, n, 2, 32)?.all_pass();
                }
            }
            Ok((ok, "n ∈ {4,8,12}, r = 2".into()))
        }),
        check("lower bound", || {
            let mut ok = true;
            for m in 3..=6 {
                ok &= lower_bound_report(&half, 2, m, 1 << m)?.holds;
            }
            Ok((ok, "a=1/2, Q=2, m ∈ 3..6".into()))
        }),
        check("exponent fit", || {
            let rows = scan(&half, delta, 10, 22, EngineKind::PaperLog)?;
            let fit = fit_exponent(&rows, &half, delta)?;
            Ok((
                fit.within(0.05),
                format!("slope {:.4}, target {:.4}", fit.slope, fit.target),
            ))
        }),
        check("engine precision", || {
            let exact = scan(&half, delta, 0, 14, EngineKind::PaperExact)?;
            let log = scan(&half, delta, 0, 14, EngineKind::PaperLog)?;
            let worst = exact
                .iter()
                .zip(&log)
                .map(|(x, y)| (x.log2_coeff - y.log2_coeff).abs() / x.log2_coeff.max(1.0))
                .fold(0.0, f64::max);
            Ok((worst <= 1e-6, format!("max relative error {worst:.2e}")))
        }),
    ]
}
