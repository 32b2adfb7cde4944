//! Face-number recursions for `P_n^a`.
//!
//! `F_n(t) = Σ_k a_{n,k} t^k` starts at `F_0 = 2 + t` and follows
//! `F ↦ F²` on product steps and `F ↦ tF² + 2F` on hull steps. That hull
//! rule counts both summands as faces of the hull (join bookkeeping). The
//! geometric engine instead follows the free sum, whose proper faces are
//! joins of proper-or-empty faces of the summands, not both empty:
//!
//! ```text
//! F ↦ 2(F − t^d) + t(F − t^d)² + t^{2d}      (d = 2^n, improper face t^d)
//! ```
//!
//! Once `d` exceeds the truncation bound all correction terms vanish and the
//! two engines use the same update.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::poly::{LogDomainPolynomial, TruncatedIntPolynomial};
use crate::schedule::{DensityParam, Schedule, StepKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum EngineKind {
    #[serde(rename = "paper")]
    PaperExact,
    #[serde(rename = "geometric")]
    GeometricExact,
    #[serde(rename = "log")]
    PaperLog,
}

impl EngineKind {
    pub fn is_exact(self) -> bool {
        !matches!(self, EngineKind::PaperLog)
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(EngineKind::PaperExact),
            "geometric" => Ok(EngineKind::GeometricExact),
            "log" => Ok(EngineKind::PaperLog),
            other => Err(usage(format!(
                "unknown engine {other:?} (paper|geometric|log)"
            ))),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::PaperExact => "paper",
            EngineKind::GeometricExact => "geometric",
            EngineKind::PaperLog => "log",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FacePolynomial {
    Exact(TruncatedIntPolynomial),
    Log(LogDomainPolynomial),
}

/// The generating function after `n` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursionState {
    pub engine: EngineKind,
    pub n: u32,
    pub poly: FacePolynomial,
}

impl RecursionState {
    pub fn initial(k_max: usize, engine: EngineKind) -> Result<Self> {
        if k_max < 1 {
            return Err(usage("truncation bound must be at least 1"));
        }
        let seed = TruncatedIntPolynomial::from_u64s(&[2, 1], k_max);
        let poly = match engine {
            EngineKind::PaperLog => FacePolynomial::Log(seed.to_log()),
            _ => FacePolynomial::Exact(seed),
        };
        Ok(RecursionState { engine, n: 0, poly })
    }

    pub fn k_max(&self) -> usize {
        match &self.poly {
            FacePolynomial::Exact(p) => p.k_max(),
            FacePolynomial::Log(p) => p.k_max(),
        }
    }

    /// Ambient dimension `2^n`, if it fits in a `usize`.
    pub fn dim(&self) -> Option<usize> {
        1usize.checked_shl(self.n)
    }

    pub fn exact(&self) -> Option<&TruncatedIntPolynomial> {
        match &self.poly {
            FacePolynomial::Exact(p) => Some(p),
            FacePolynomial::Log(_) => None,
        }
    }

    pub fn log2_coeff(&self, k: usize) -> f64 {
        match &self.poly {
            FacePolynomial::Exact(p) => crate::poly::log2_biguint(p.coeff(k)),
            FacePolynomial::Log(p) => p.log2_coeffs()[k],
        }
    }

    pub fn log2_coeffs(&self) -> Vec<f64> {
        match &self.poly {
            FacePolynomial::Exact(p) => p.to_log().log2_coeffs().to_vec(),
            FacePolynomial::Log(p) => p.log2_coeffs().to_vec(),
        }
    }

    /// Proper-face counts `f_0, …, f_{d-1}` as far as the truncation reaches.
    pub fn f_vector(&self) -> Option<Vec<BigUint>> {
        let p = self.exact()?;
        let end = self.dim().map_or(p.k_max() + 1, |d| d.min(p.k_max() + 1));
        Some(p.coeffs()[..end].to_vec())
    }

    pub fn step(&self, kind: StepKind) -> Result<Self> {
        let poly = match (&self.poly, kind) {
            (FacePolynomial::Exact(f), StepKind::Product) => FacePolynomial::Exact(f.square()),
            (FacePolynomial::Log(f), StepKind::Product) => FacePolynomial::Log(f.square()?),
            (FacePolynomial::Exact(f), StepKind::Hull) => {
                let geometric_fix = self.engine == EngineKind::GeometricExact
                    && self.dim().is_some_and(|d| d <= f.k_max());
                if geometric_fix {
                    FacePolynomial::Exact(free_sum_step(f, self.dim().unwrap())?)
                } else {
                    FacePolynomial::Exact(f.square().shift_up().add(&f.scale(2))?)
                }
            }
            (FacePolynomial::Log(f), StepKind::Hull) => {
                FacePolynomial::Log(f.square()?.shift_up().add(&f.scale_log2(1.0))?)
            }
        };
        Ok(RecursionState {
            engine: self.engine,
            n: self.n + 1,
            poly,
        })
    }
}

/// Free-sum update while the improper face `t^d` is still stored.
fn free_sum_step(f: &TruncatedIntPolynomial, d: usize) -> Result<TruncatedIntPolynomial> {
    let k_max = f.k_max();
    if !f.coeff(d).is_one() {
        return Err(Error::Verification(format!(
            "geometric state lost its improper face at t^{d}"
        )));
    }
    let proper = f.checked_sub(&TruncatedIntPolynomial::monomial(BigUint::one(), d, k_max))?;
    let top = TruncatedIntPolynomial::monomial(BigUint::one(), 2 * d, k_max);
    proper.square().shift_up().add(&proper.scale(2))?.add(&top)
}

/// Runs `n` steps of the schedule for `a` and returns the final state.
pub fn face_numbers(
    a: &DensityParam,
    n: u32,
    k_max: usize,
    engine: EngineKind,
) -> Result<RecursionState> {
    let schedule = Schedule::new(a, n as usize)?;
    let mut state = RecursionState::initial(k_max, engine)?;
    for kind in &schedule.kinds {
        state = state.step(*kind)?;
    }
    Ok(state)
}

/// All states `0..=n_max`.
pub fn face_history(
    a: &DensityParam,
    n_max: u32,
    k_max: usize,
    engine: EngineKind,
) -> Result<Vec<RecursionState>> {
    let schedule = Schedule::new(a, n_max as usize)?;
    let mut states = vec![RecursionState::initial(k_max, engine)?];
    for kind in &schedule.kinds {
        let next = states.last().unwrap().step(*kind)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub k: usize,
    /// `a_{n+1,k} ≥ a_{n,k}`.
    pub monotone: bool,
    /// `a_{n+r,k} ≤ max(k,2)^{2^r} · A_{n,k}^{2^r}`.
    pub power_bound: bool,
    /// `log a_{n,k} ≤ log a_{n+r,k} ≤ 2^r (log max(k,2) + log A_{n,k})`.
    pub sandwich: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub n: u32,
    pub r: u32,
    pub rows: Vec<GrowthRow>,
}

impl GrowthReport {
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|row| row.monotone && row.power_bound && row.sandwich)
    }
}

/// Checks monotonicity and the `r`-step power bound between steps `n` and
/// `n + r` with the paper engine.
///
/// The bound uses `max(k, 2)` where a bare `k` would make it vacuous (`k = 0`)
/// or false (`k = 1` after a hull step).
pub fn verify_growth_bounds(
    a: &DensityParam,
    n: u32,
    r: u32,
    k_max: usize,
) -> Result<GrowthReport> {
    if r > 8 {
        return Err(usage("growth bound checks support r ≤ 8"));
    }
    let history = face_history(a, n + r.max(1), k_max, EngineKind::PaperExact)?;
    let base = history[n as usize].exact().unwrap();
    let next = history[n as usize + 1].exact().unwrap();
    let far = history[(n + r) as usize].exact().unwrap();
    let power = 1u32 << r;
    let mut running_max = BigUint::zero();
    let rows = (0..=k_max)
        .map(|k| {
            if base.coeff(k) > &running_max {
                running_max = base.coeff(k).clone();
            }
            let bound = (BigUint::from(k.max(2)) * &running_max).pow(power);
            let power_bound = far.coeff(k) <= &bound;
            GrowthRow {
                k,
                monotone: next.coeff(k) >= base.coeff(k),
                power_bound,
                sandwich: base.coeff(k) <= far.coeff(k) && power_bound,
            }
        })
        .collect();
    Ok(GrowthReport { n, r, rows })
}
