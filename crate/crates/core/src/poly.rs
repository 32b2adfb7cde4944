//! Truncated univariate polynomials in `t`.
//!
//! [`TruncatedIntPolynomial`] keeps exact nonnegative big-integer coefficients
//! for degrees `0..=k_max` and silently drops everything above. The
//! log-domain twin [`LogDomainPolynomial`] stores `log2` of each coefficient
//! and is the fast path for large scans.

use std::ops::Range;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{usage, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedIntPolynomial {
    coeffs: Vec<BigUint>,
}

impl TruncatedIntPolynomial {
    pub fn zero(k_max: usize) -> Self {
        TruncatedIntPolynomial {
            coeffs: vec![BigUint::zero(); k_max + 1],
        }
    }

    pub fn one(k_max: usize) -> Self {
        Self::monomial(BigUint::one(), 0, k_max)
    }

    pub fn monomial(c: BigUint, degree: usize, k_max: usize) -> Self {
        let mut p = Self::zero(k_max);
        if degree <= k_max {
            p.coeffs[degree] = c;
        }
        p
    }

    /// Builds from coefficients, padding with zeros or dropping terms above `k_max`.
    pub fn from_coeffs(coeffs: impl IntoIterator<Item = BigUint>, k_max: usize) -> Self {
        let mut coeffs: Vec<BigUint> = coeffs.into_iter().take(k_max + 1).collect();
        coeffs.resize(k_max + 1, BigUint::zero());
        TruncatedIntPolynomial { coeffs }
    }

    pub fn from_u64s(coeffs: &[u64], k_max: usize) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| BigUint::from(c)), k_max)
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<BigUint> {
        self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &BigUint {
        &self.coeffs[k]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Highest degree with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// Lowest degree with a nonzero coefficient.
    pub fn lowest_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn support(&self) -> Range<usize> {
        match (self.lowest_degree(), self.degree()) {
            (Some(lo), Some(hi)) => lo..hi + 1,
            _ => 0..0,
        }
    }

    fn check_same_bound(&self, other: &Self) -> Result<()> {
        if self.k_max() != other.k_max() {
            return Err(usage(format!(
                "truncation bounds differ: {} vs {}",
                self.k_max(),
                other.k_max()
            )));
        }
        Ok(())
    }

    /// Exact truncated product.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_same_bound(other)?;
        let (fs, gs) = (self.support(), other.support());
        let coeff = |k: usize| {
            let mut acc = BigUint::zero();
            if fs.is_empty() || gs.is_empty() {
                return acc;
            }
            let lo = fs.start.max(k.saturating_sub(gs.end - 1));
            let hi = (fs.end - 1).min(k.saturating_sub(gs.start));
            if k < gs.start {
                return acc;
            }
            for j in lo..=hi {
                acc += &self.coeffs[j] * &other.coeffs[k - j];
            }
            acc
        };
        Ok(TruncatedIntPolynomial {
            coeffs: collect_coeffs(self.k_max(), coeff),
        })
    }

    /// Exact truncated square; pairs `(j, k-j)` are multiplied once.
    pub fn square(&self) -> Self {
        let s = self.support();
        let coeff = |k: usize| {
            let mut acc = BigUint::zero();
            if s.is_empty() || k < 2 * s.start {
                return acc;
            }
            let lo = s.start.max(k.saturating_sub(s.end - 1));
            let mut j = lo;
            while 2 * j < k {
                acc += &self.coeffs[j] * &self.coeffs[k - j];
                j += 1;
            }
            acc <<= 1;
            if k.is_multiple_of(2) && k / 2 < s.end {
                let c = &self.coeffs[k / 2];
                acc += c * c;
            }
            acc
        };
        TruncatedIntPolynomial {
            coeffs: collect_coeffs(self.k_max(), coeff),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_bound(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(TruncatedIntPolynomial { coeffs })
    }

    /// Coefficientwise `self - other`; fails if any coefficient would go negative.
    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_bound(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(k, (a, b))| {
                if a < b {
                    Err(Error::Verification(format!(
                        "negative coefficient at t^{k}"
                    )))
                } else {
                    Ok(a - b)
                }
            })
            .collect::<Result<_>>()?;
        Ok(TruncatedIntPolynomial { coeffs })
    }

    pub fn scale(&self, c: u32) -> Self {
        TruncatedIntPolynomial {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    /// Multiplication by `t`.
    pub fn shift_up(&self) -> Self {
        let k_max = self.k_max();
        let mut coeffs = Vec::with_capacity(k_max + 1);
        coeffs.push(BigUint::zero());
        coeffs.extend(self.coeffs[..k_max].iter().cloned());
        TruncatedIntPolynomial { coeffs }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.k_max());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.convolve(&base).expect("same bound");
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    pub fn eval_at_one(&self) -> BigUint {
        self.coeffs.iter().sum()
    }

    /// Keeps only degrees `0..=k`; `k` may exceed the current bound (zero padding).
    pub fn retruncate(&self, k: usize) -> Self {
        Self::from_coeffs(self.coeffs.iter().cloned(), k)
    }

    pub fn to_log(&self) -> LogDomainPolynomial {
        LogDomainPolynomial {
            log2_coeffs: self.coeffs.iter().map(log2_biguint).collect(),
        }
    }
}

/// Below this bound the per-coefficient work is too small to split.
const PARALLEL_MIN_K: usize = 96;

fn collect_coeffs(k_max: usize, coeff: impl Fn(usize) -> BigUint + Sync + Send) -> Vec<BigUint> {
    if k_max < PARALLEL_MIN_K {
        (0..=k_max).map(coeff).collect()
    } else {
        (0..=k_max).into_par_iter().map(coeff).collect()
    }
}

pub fn convolve_truncated(
    f: &TruncatedIntPolynomial,
    g: &TruncatedIntPolynomial,
) -> Result<TruncatedIntPolynomial> {
    f.convolve(g)
}

pub fn eval_at_one(f: &TruncatedIntPolynomial) -> BigUint {
    f.eval_at_one()
}

/// `log2 x` for a big integer, `-inf` for zero.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().unwrap().to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap() as f64;
    top.log2() + shift as f64
}

/// `log2(2^a + 2^b)`.
#[inline]
pub fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() * std::f64::consts::LOG2_E
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogDomainPolynomial {
    log2_coeffs: Vec<f64>,
}

impl LogDomainPolynomial {
    pub fn zero(k_max: usize) -> Self {
        LogDomainPolynomial {
            log2_coeffs: vec![f64::NEG_INFINITY; k_max + 1],
        }
    }

    pub fn from_log2(log2_coeffs: Vec<f64>) -> Result<Self> {
        if log2_coeffs.is_empty() {
            return Err(usage("a polynomial needs at least one coefficient slot"));
        }
        if log2_coeffs
            .iter()
            .any(|x| x.is_nan() || *x == f64::INFINITY)
        {
            return Err(usage("log2 coefficients must be finite or -inf"));
        }
        Ok(LogDomainPolynomial { log2_coeffs })
    }

    pub fn k_max(&self) -> usize {
        self.log2_coeffs.len() - 1
    }

    pub fn log2_coeffs(&self) -> &[f64] {
        &self.log2_coeffs
    }

    fn support(&self) -> Range<usize> {
        let lo = self.log2_coeffs.iter().position(|x| x.is_finite());
        let hi = self.log2_coeffs.iter().rposition(|x| x.is_finite());
        match (lo, hi) {
            (Some(lo), Some(hi)) => lo..hi + 1,
            _ => 0..0,
        }
    }

    fn check(self) -> Result<Self> {
        if let Some(k) = self
            .log2_coeffs
            .iter()
            .position(|x| x.is_nan() || *x == f64::INFINITY)
        {
            return Err(Error::Overflow(format!(
                "coefficient {k} left the f64 exponent range"
            )));
        }
        Ok(self)
    }

    /// Truncated product in the log domain.
    ///
    /// Each output entry extracts the maximal term first and then sums the
    /// rescaled terms in increasing `j`, so the result does not depend on how
    /// the outer loop is scheduled.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.k_max() != other.k_max() {
            return Err(usage(format!(
                "truncation bounds differ: {} vs {}",
                self.k_max(),
                other.k_max()
            )));
        }
        let (fs, gs) = (self.support(), other.support());
        let (f, g) = (&self.log2_coeffs, &other.log2_coeffs);
        let log2_coeffs = (0..=self.k_max())
            .into_par_iter()
            .map(|k| {
                if fs.is_empty() || gs.is_empty() || k < fs.start + gs.start {
                    return f64::NEG_INFINITY;
                }
                let lo = fs.start.max(k.saturating_sub(gs.end - 1));
                let hi = (fs.end - 1).min(k - gs.start);
                if lo > hi {
                    return f64::NEG_INFINITY;
                }
                let terms = (lo..=hi).map(|j| f[j] + g[k - j]);
                let peak = terms.clone().fold(f64::NEG_INFINITY, f64::max);
                if peak == f64::NEG_INFINITY {
                    return peak;
                }
                let sum: f64 = terms.map(|x| (x - peak).exp2()).sum();
                peak + sum.log2()
            })
            .collect();
        LogDomainPolynomial { log2_coeffs }.check()
    }

    /// Log-domain square; symmetric pairs enter once with weight 2.
    pub fn square(&self) -> Result<Self> {
        let s = self.support();
        let f = &self.log2_coeffs;
        let log2_coeffs = (0..=self.k_max())
            .into_par_iter()
            .map(|k| {
                if s.is_empty() || k < 2 * s.start {
                    return f64::NEG_INFINITY;
                }
                let lo = s.start.max(k.saturating_sub(s.end - 1));
                if 2 * lo > k {
                    return f64::NEG_INFINITY;
                }
                // pairs j < k-j carry an extra factor 2
                let term = |j: usize| {
                    if 2 * j == k {
                        2.0 * f[j]
                    } else {
                        f[j] + f[k - j] + 1.0
                    }
                };
                let top = k / 2;
                let peak = (lo..=top).map(term).fold(f64::NEG_INFINITY, f64::max);
                if peak == f64::NEG_INFINITY {
                    return peak;
                }
                let sum: f64 = (lo..=top).map(|j| (term(j) - peak).exp2()).sum();
                peak + sum.log2()
            })
            .collect();
        LogDomainPolynomial { log2_coeffs }.check()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k_max() != other.k_max() {
            return Err(usage("truncation bounds differ"));
        }
        let log2_coeffs = self
            .log2_coeffs
            .iter()
            .zip(&other.log2_coeffs)
            .map(|(a, b)| log2_add(*a, *b))
            .collect();
        LogDomainPolynomial { log2_coeffs }.check()
    }

    /// Multiplication by `2^c`.
    pub fn scale_log2(&self, c: f64) -> Self {
        LogDomainPolynomial {
            log2_coeffs: self.log2_coeffs.iter().map(|x| x + c).collect(),
        }
    }

    pub fn shift_up(&self) -> Self {
        let k_max = self.k_max();
        let mut log2_coeffs = Vec::with_capacity(k_max + 1);
        log2_coeffs.push(f64::NEG_INFINITY);
        log2_coeffs.extend_from_slice(&self.log2_coeffs[..k_max]);
        LogDomainPolynomial { log2_coeffs }
    }
}

pub fn log_convolve_truncated(
    f: &LogDomainPolynomial,
    g: &LogDomainPolynomial,
) -> Result<LogDomainPolynomial> {
    f.convolve(g)
}
