//! Scans of `log2 a_{n,⌊d^δ⌋}` across `n`, exponent fits, the envelope ratio
//! and the exponent report for the face/facet/radii product.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::recursion::{EngineKind, RecursionState};
use crate::schedule::{choose_window, window_for_total, DensityParam, Schedule};
use crate::trees::upper_bound_ratio;

/// Largest truncation the exact engines accept in a scan.
pub const EXACT_K_CAP: u64 = 1024;
pub const EXACT_N_CAP: u32 = 20;
/// Largest truncation the log engine accepts in a scan.
pub const LOG_K_CAP: u64 = 8192;
pub const LOG_N_CAP: u32 = 40;

/// Envelope constant for `max ρ / min ρ` over a scan, recorded from the
/// reference scans (a ∈ {1/2, 1/3}, δ = 1/2, n ≤ 26).
pub const ENVELOPE_GOLDEN: f64 = 8.0;

/// Cap on `max |log2 ρ_n| / √n`, recorded from the same scans plus the
/// golden-ratio density at 128 bits with `Q = ⌊√n⌋`.
pub const DRIFT_GOLDEN: f64 = 1.5;

/// Rational exponent `δ = num/den ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Delta {
    pub num: u32,
    pub den: u32,
}

impl Delta {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || num >= den {
            return Err(usage(format!("δ must lie in (0,1), got {num}/{den}")));
        }
        let g = num_integer::gcd(num, den);
        Ok(Delta {
            num: num / g,
            den: den / g,
        })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl FromStr for Delta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (n, d) = s
            .split_once('/')
            .ok_or_else(|| usage(format!("expected NUM/DEN, got {s:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| usage(format!("bad integer {x:?} in δ")))
        };
        Delta::new(parse(n)?, parse(d)?)
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// `k = ⌊(2^n)^δ⌋`, computed as an integer root.
pub fn coefficient_index(n: u32, delta: Delta) -> Result<u64> {
    let power = BigUint::one() << (n as usize * delta.num as usize);
    power
        .nth_root(delta.den)
        .to_u64()
        .ok_or_else(|| usage(format!("k = ⌊2^({n}·{delta})⌋ does not fit in 64 bits")))
}

fn check_feasible(engine: EngineKind, n_max: u32, k: u64) -> Result<()> {
    let (n_cap, k_cap) = if engine.is_exact() {
        (EXACT_N_CAP, EXACT_K_CAP)
    } else {
        (LOG_N_CAP, LOG_K_CAP)
    };
    if n_max > n_cap || k > k_cap {
        return Err(usage(format!(
            "scan infeasible for the {engine} engine: needs n ≤ {n_cap} and k = ⌊d^δ⌋ ≤ {k_cap}, got n = {n_max}, k = {k}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: u32,
    pub d: u64,
    pub k: u64,
    pub engine: EngineKind,
    pub log2_coeff: f64,
    /// `log2 a_{n,k} / (2^{m·p} · k^{1-p/Q})`.
    pub rho: f64,
    pub q: u32,
    pub m: u64,
    pub p: u32,
}

/// One row per `n ∈ [n_min, n_max]`. The engine runs once, truncated at
/// `⌊d_max^δ⌋`; lower coefficients are unaffected by truncation.
pub fn scan(
    a: &DensityParam,
    delta: Delta,
    n_min: u32,
    n_max: u32,
    engine: EngineKind,
) -> Result<Vec<ScanRow>> {
    if n_min > n_max {
        return Err(usage(format!("empty range {n_min}..={n_max}")));
    }
    let k_max = coefficient_index(n_max, delta)?;
    check_feasible(engine, n_max, k_max)?;
    let schedule = Schedule::new(a, n_max as usize)?;
    let mut state = RecursionState::initial(k_max as usize, engine)?;
    let mut rows = Vec::new();
    for n in 0..=n_max {
        if n >= n_min {
            let k = coefficient_index(n, delta)?;
            let q = choose_window(n as u64, a);
            let window = window_for_total(a, n as u64, q)?.window;
            let log2_coeff = state.log2_coeff(k as usize);
            rows.push(ScanRow {
                n,
                d: 1u64 << n,
                k,
                engine,
                log2_coeff,
                rho: upper_bound_ratio(log2_coeff, q, window.p, window.m, k),
                q,
                m: window.m,
                p: window.p,
            });
        }
        if n < n_max {
            state = state.step(schedule.kinds[n as usize])?;
        }
    }
    Ok(rows)
}

/// `a + δ(1 - a)`.
pub fn target_exponent(a: f64, delta: Delta) -> f64 {
    a + delta.as_f64() * (1.0 - a)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub target: f64,
    /// `n` values that entered the fit.
    pub used: Vec<u32>,
    /// Slopes between consecutive used rows.
    pub finite_differences: Vec<f64>,
    pub max_residual: f64,
    /// `log2_coeff` strictly increases along the used rows.
    pub monotone: bool,
    /// The data shows no growth (slope ≈ 0).
    pub non_growth: bool,
}

impl FitReport {
    pub fn deviation(&self) -> f64 {
        (self.slope - self.target).abs()
    }

    pub fn within(&self, tolerance: f64) -> bool {
        self.deviation() <= tolerance
    }
}

/// Least-squares slope of `log2(log2 a_{n,k})` against `n`. For rational
/// `a = p/q` only rows with `n ≡ 0 (mod q)` are used.
pub fn fit_exponent(rows: &[ScanRow], a: &DensityParam, delta: Delta) -> Result<FitReport> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.engine != first.engine) {
            return Err(usage("rows come from different engines"));
        }
    }
    let modulus = match a {
        DensityParam::Rational { q, .. } => *q,
        DensityParam::Real { .. } => 1,
    };
    let usable: Vec<&ScanRow> = rows
        .iter()
        .filter(|r| {
            (r.n as u64).is_multiple_of(modulus) && r.log2_coeff > 0.0 && r.log2_coeff.is_finite()
        })
        .collect();
    if usable.len() < 4 {
        return Err(usage(format!(
            "exponent fit needs at least 4 usable rows (n ≡ 0 mod {modulus}, positive log2), got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.log2_coeff.log2()).collect();
    let len = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / len, ys.iter().sum::<f64>() / len);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let finite_differences = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    Ok(FitReport {
        slope,
        intercept,
        target: target_exponent(a.as_f64(), delta),
        used: usable.iter().map(|r| r.n).collect(),
        finite_differences,
        max_residual,
        monotone: usable.windows(2).all(|w| w[1].log2_coeff > w[0].log2_coeff),
        non_growth: slope.abs() < 1e-9,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub rho: Vec<(u32, f64)>,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub constant: f64,
    pub within: bool,
    /// `max |log2 ρ_n| / √n` over rows with `n ≥ 1`; stays bounded when the
    /// envelope drifts like `d^{O(1/√log d)}`.
    pub drift: f64,
}

/// Spread `max ρ / min ρ` over rows with `k ≥ 1` and positive `ρ`, checked
/// against `constant`.
pub fn bound_envelope(rows: &[ScanRow], constant: f64) -> EnvelopeReport {
    let rho: Vec<(u32, f64)> = rows
        .iter()
        .filter(|r| r.rho > 0.0)
        .map(|r| (r.n, r.rho))
        .collect();
    let min = rho.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let max = rho.iter().map(|x| x.1).fold(0.0, f64::max);
    let spread = if rho.is_empty() { 1.0 } else { max / min };
    let drift = rho
        .iter()
        .filter(|(n, _)| *n >= 1)
        .map(|(n, r)| r.log2().abs() / (*n as f64).sqrt())
        .fold(0.0, f64::max);
    EnvelopeReport {
        rho,
        min,
        max,
        spread,
        constant,
        within: spread <= constant,
        drift,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlmReport {
    pub a: f64,
    pub delta: f64,
    /// Exponent of `log |facets|`.
    pub facet_exponent: f64,
    /// Exponent of `log |vertices|`.
    pub vertex_exponent: f64,
    /// Exponent of `(R/r)²`.
    pub radii_exponent: f64,
    pub total: f64,
    pub fitted_vertex_exponent: Option<f64>,
    pub notes: Vec<String>,
}

/// Exponent triple `(1-a, a+δ(1-a), 1-δ+a)` and its sum `2 + a(1-δ)`.
pub fn flm_report(a: f64, delta: Delta, fit: Option<&FitReport>) -> FlmReport {
    let dl = delta.as_f64();
    let facet_exponent = 1.0 - a;
    let vertex_exponent = target_exponent(a, delta);
    let radii_exponent = 1.0 - dl + a;
    FlmReport {
        a,
        delta: dl,
        facet_exponent,
        vertex_exponent,
        radii_exponent,
        total: facet_exponent + vertex_exponent + radii_exponent,
        fitted_vertex_exponent: fit.map(|f| f.slope),
        notes: vec![
            "facet and radii exponents are quoted bounds for random sections; not computed here".into(),
            "vertex exponent: vertices of a generic (d-k)-section are bounded by f_k(P_n^a), k = floor(d^delta); measured by the scan fit".into(),
        ],
    }
}
