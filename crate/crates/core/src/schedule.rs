//! Step schedules: which levels of the recursive construction are products
//! and which are convex hulls (free sums).
//!
//! Step `n` takes `P_n` to `P_{n+1}`. It is a product step iff the half-open
//! interval `[n·a, (n+1)·a)` contains an integer, i.e. iff `n = ⌊m/a⌋` for
//! some integer `m ≥ 0`. Step 0 is therefore always a product.

use std::fmt;

use num_bigint::BigUint;
use num_integer::{Integer, Roots};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{usage, Error, Result};

/// Kind of a single construction step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StepKind {
    /// Cartesian product of two copies; `F ↦ F²`.
    Product,
    /// Convex hull of two copies in complementary subspaces; `F ↦ tF² + 2F`.
    Hull,
}

impl StepKind {
    pub fn letter(self) -> char {
        match self {
            StepKind::Product => 'P',
            StepKind::Hull => 'H',
        }
    }

    /// Letter of the corresponding map in the window composition (`S` or `R`).
    pub fn map_letter(self) -> char {
        match self {
            StepKind::Product => 'S',
            StepKind::Hull => 'R',
        }
    }
}

/// The density parameter `a ∈ (0,1)`.
///
/// The real form stores a dyadic approximation `mantissa / 2^bits` whose
/// distance to the true value is at most `2^-bits`. Every comparison made
/// with it is decided on the whole uncertainty interval or refused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DensityParam {
    Rational { p: u64, q: u64 },
    Real { mantissa: BigUint, bits: u32 },
}

impl DensityParam {
    /// `p/q`, reduced to lowest terms.
    pub fn rational(p: u64, q: u64) -> Result<Self> {
        if q == 0 || p == 0 || p >= q {
            return Err(usage(format!(
                "density {p}/{q} must lie in the open interval (0,1)"
            )));
        }
        let g = p.gcd(&q);
        Ok(DensityParam::Rational { p: p / g, q: q / g })
    }

    pub fn real(mantissa: BigUint, bits: u32) -> Result<Self> {
        if bits < 2 {
            return Err(usage("a real density needs at least 2 bits of precision"));
        }
        let one = BigUint::one() << bits;
        if mantissa <= BigUint::one() || &mantissa + 1u32 >= one {
            return Err(usage(
                "real density must lie in the open interval (0,1) with margin 2^-bits",
            ));
        }
        Ok(DensityParam::Real { mantissa, bits })
    }

    /// Parses `P/Q`.
    pub fn parse_rational(s: &str) -> Result<Self> {
        let (p, q) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| usage(format!("expected P/Q, got {s:?}")))?;
        let p: u64 = p
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad numerator in {s:?}")))?;
        let q: u64 = q
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad denominator in {s:?}")))?;
        Self::rational(p, q)
    }

    /// Parses `V:BITS`, where `V` is a decimal like `0.6180339887…`.
    pub fn parse_real(s: &str) -> Result<Self> {
        let (v, bits) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| usage(format!("expected V:BITS, got {s:?}")))?;
        let bits: u32 = bits
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad bit count in {s:?}")))?;
        Self::from_decimal(v.trim(), bits)
    }

    /// Rounds a decimal string to the nearest multiple of `2^-bits`.
    pub fn from_decimal(v: &str, bits: u32) -> Result<Self> {
        let (int_part, frac_part) = v.split_once('.').unwrap_or((v, ""));
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || (int_part.is_empty() && frac_part.is_empty())
        {
            return Err(usage(format!("bad decimal value {v:?}")));
        }
        let digits = format!("{int_part}{frac_part}");
        let numer = BigUint::parse_bytes(digits.as_bytes(), 10).unwrap_or_default();
        let denom = BigUint::from(10u32).pow(frac_part.len() as u32);
        let scaled = (numer << bits) * 2u32 + &denom;
        let mantissa = scaled / (denom * 2u32);
        Self::real(mantissa, bits)
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, DensityParam::Rational { .. })
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            DensityParam::Rational { p, q } => *p as f64 / *q as f64,
            DensityParam::Real { mantissa, bits } => {
                let shift = mantissa.bits().saturating_sub(64);
                let top = (mantissa >> shift).to_f64().unwrap_or(0.0);
                top * 2f64.powi(shift as i32 - *bits as i32)
            }
        }
    }

    /// Integers `(lo, hi)` with `lo ≤ ⌊c·a⌋` and `⌈c·a⌉ ≤ hi`; exact for rationals.
    fn multiple_bracket(&self, c: u64) -> (u64, u64) {
        match self {
            DensityParam::Rational { p, q } => {
                let num = c as u128 * *p as u128;
                let q = *q as u128;
                ((num / q) as u64, num.div_ceil(q) as u64)
            }
            DensityParam::Real { mantissa, bits } => {
                let lo: BigUint = (mantissa - 1u32) * c;
                let hi: BigUint = (mantissa + 1u32) * c;
                let one = BigUint::one() << *bits;
                let fl = (&lo >> *bits).to_u64().unwrap_or(u64::MAX);
                let ce = hi.div_ceil(&one).to_u64().unwrap_or(u64::MAX);
                (fl, ce)
            }
        }
    }
}

/// `P/Q` for a rational density, `V:BITS` for a decimal rounded to `BITS` bits.
impl std::str::FromStr for DensityParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            Self::parse_real(s)
        } else {
            Self::parse_rational(s)
        }
    }
}

impl fmt::Display for DensityParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityParam::Rational { p, q } => write!(f, "{p}/{q}"),
            DensityParam::Real { bits, .. } => write!(f, "{:.12}:{bits}", self.as_f64()),
        }
    }
}

/// Decides whether step `n` is a product step.
pub fn is_product_step(n: u64, a: &DensityParam) -> Result<StepKind> {
    let kind = |b: bool| if b { StepKind::Product } else { StepKind::Hull };
    match a {
        DensityParam::Rational { p, q } => {
            let (p, q, n) = (*p as u128, *q as u128, n as u128);
            let c = (n * p).div_ceil(q);
            Ok(kind(c * q < (n + 1) * p))
        }
        DensityParam::Real { mantissa, bits } => {
            if n == 0 {
                return Ok(StepKind::Product);
            }
            let one = BigUint::one() << *bits;
            let lo1: BigUint = (mantissa - 1u32) * n;
            let hi1: BigUint = (mantissa + 1u32) * n;
            if (&lo1 >> *bits) != (&hi1 >> *bits) || (&lo1 % &one).is_zero() {
                return Err(Error::Precision(format!(
                    "{bits} bits cannot locate {n}·a between consecutive integers"
                )));
            }
            let candidate = ((&lo1 >> *bits) + 1u32) << *bits;
            let lo2: BigUint = (mantissa - 1u32) * (n + 1);
            let hi2: BigUint = (mantissa + 1u32) * (n + 1);
            if candidate < lo2 {
                Ok(StepKind::Product)
            } else if candidate >= hi2 {
                Ok(StepKind::Hull)
            } else {
                Err(Error::Precision(format!(
                    "{bits} bits cannot compare ⌈{n}·a⌉ with {}·a",
                    n + 1
                )))
            }
        }
    }
}

/// The first `steps` step kinds for a density.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub a: DensityParam,
    pub kinds: Vec<StepKind>,
}

impl Schedule {
    pub fn new(a: &DensityParam, steps: usize) -> Result<Self> {
        let kinds = (0..steps as u64)
            .map(|n| is_product_step(n, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule {
            a: a.clone(),
            kinds,
        })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn products_before(&self, n: usize) -> usize {
        self.kinds[..n]
            .iter()
            .filter(|k| **k == StepKind::Product)
            .count()
    }

    /// Index of the first hull step, if any.
    pub fn first_hull(&self) -> Option<usize> {
        self.kinds.iter().position(|k| *k == StepKind::Hull)
    }
}

/// A window of `q` consecutive steps `[q·m, q·m + q)`.
///
/// `r` is the remainder when the window comes from decomposing a total step
/// count `n = q·m + r`; it is zero for a bare window lookup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub q: u32,
    pub m: u64,
    pub r: u32,
    pub p: u32,
}

/// A window together with its kind word, innermost step first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowProfile {
    pub window: Window,
    pub word: Vec<StepKind>,
}

pub fn window_profile(a: &DensityParam, q: u32, m: u64) -> Result<WindowProfile> {
    if q == 0 {
        return Err(usage("window length must be at least 1"));
    }
    let start = q as u64 * m;
    let word = (start..start + q as u64)
        .map(|n| is_product_step(n, a))
        .collect::<Result<Vec<_>>>()?;
    let p = word.iter().filter(|k| **k == StepKind::Product).count() as u32;
    let (lo, hi) = a.multiple_bracket(q as u64);
    if (p as u64) < lo || (p as u64) > hi {
        return Err(Error::Verification(format!(
            "window (Q={q}, m={m}) has {p} products, outside [{lo}, {hi}]"
        )));
    }
    Ok(WindowProfile {
        window: Window { q, m, r: 0, p },
        word,
    })
}

/// Window containing the decomposition `n = q·m + r`.
pub fn window_for_total(a: &DensityParam, n: u64, q: u32) -> Result<WindowProfile> {
    if q == 0 {
        return Err(usage("window length must be at least 1"));
    }
    let mut profile = window_profile(a, q, n / q as u64)?;
    profile.window.r = (n % q as u64) as u32;
    Ok(profile)
}

/// Window length for a total of `n` steps: the denominator for rational `a`,
/// `⌊√n⌋` (at least 1) otherwise.
pub fn choose_window(n: u64, a: &DensityParam) -> u32 {
    match a {
        DensityParam::Rational { q, .. } => *q as u32,
        DensityParam::Real { .. } => n.sqrt().max(1) as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StepKind::*;

    fn rat(p: u64, q: u64) -> DensityParam {
        DensityParam::rational(p, q).unwrap()
    }

    fn golden() -> DensityParam {
        DensityParam::from_decimal(
            "0.618033988749894848204586834365638117720309179805762862135",
            128,
        )
        .unwrap()
    }

    #[test]
    fn membership_examples() {
        assert_eq!(is_product_step(0, &rat(1, 2)).unwrap(), Product);
        assert_eq!(is_product_step(1, &rat(1, 2)).unwrap(), Hull);
        assert_eq!(is_product_step(4, &rat(2, 5)).unwrap(), Hull);
        // A_{2/5} = {0, 2, 5, 7, 10, ...}
        let kinds = Schedule::new(&rat(2, 5), 11).unwrap().kinds;
        let products: Vec<usize> = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == Product)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(products, vec![0, 2, 5, 7, 10]);
    }

    #[test]
    fn window_examples() {
        let w = window_profile(&rat(1, 2), 2, 0).unwrap();
        assert_eq!(w.word, vec![Product, Hull]);
        assert_eq!(w.window.p, 1);
        let w = window_profile(&rat(1, 3), 3, 1).unwrap();
        assert_eq!(w.word, vec![Product, Hull, Hull]);
        assert_eq!(w.window.p, 1);
        let w = window_profile(&rat(2, 3), 3, 0).unwrap();
        assert_eq!(w.word, vec![Product, Product, Hull]);
        assert_eq!(w.window.p, 2);
    }

    #[test]
    fn window_choice() {
        assert_eq!(choose_window(20, &rat(1, 2)), 2);
        assert_eq!(choose_window(1, &rat(1, 2)), 2);
        assert_eq!(choose_window(100, &golden()), 10);
        assert_eq!(choose_window(24, &golden()), 4);
        assert_eq!(choose_window(1, &golden()), 1);
    }

    #[test]
    fn decomposition_carries_remainder() {
        let w = window_for_total(&rat(1, 3), 11, 3).unwrap();
        assert_eq!((w.window.m, w.window.r), (3, 2));
    }

    #[test]
    fn rational_is_reduced_and_validated() {
        assert_eq!(rat(2, 4), rat(1, 2));
        assert!(DensityParam::rational(3, 2).is_err());
        assert!(DensityParam::rational(0, 2).is_err());
        assert!(DensityParam::rational(2, 2).is_err());
        assert!(DensityParam::parse_rational("1/x").is_err());
        assert_eq!(DensityParam::parse_rational(" 2/6 ").unwrap(), rat(1, 3));
    }

    #[test]
    fn real_density_matches_beatty_sequence() {
        // Product steps of the golden-ratio conjugate are ⌊m·φ⌋ with φ = 1/a.
        let a = golden();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let expected: Vec<u64> = (0..40).map(|m| (m as f64 * phi).floor() as u64).collect();
        let kinds = Schedule::new(&a, 60).unwrap().kinds;
        let got: Vec<u64> = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == Product)
            .map(|(i, _)| i as u64)
            .collect();
        assert_eq!(
            got,
            expected.into_iter().filter(|n| *n < 60).collect::<Vec<_>>()
        );
        assert!((a.as_f64() - 0.6180339887498949).abs() < 1e-15);
    }

    #[test]
    fn low_precision_is_refused() {
        // 0.5 ± 2^-3: 1·a could be on either side of 1/2, 2·a on either side of 1.
        let a = DensityParam::from_decimal("0.5", 3).unwrap();
        assert!(matches!(is_product_step(2, &a), Err(Error::Precision(_))));
        let a = DensityParam::from_decimal("0.6180339887", 12).unwrap();
        let err = Schedule::new(&a, 5000).unwrap_err();
        assert!(matches!(err, Error::Precision(_)));
    }

    #[test]
    fn real_parse_rejects_garbage() {
        assert!(DensityParam::parse_real("0.5").is_err());
        assert!(DensityParam::parse_real("0.5:x").is_err());
        assert!(DensityParam::parse_real("1.5:64").is_err());
        assert!(DensityParam::parse_real("-0.5:64").is_err());
        assert!(DensityParam::parse_real("0.25:64").is_ok());
    }

    fn coprime_pair() -> impl proptest::strategy::Strategy<Value = DensityParam> {
        use proptest::prelude::*;
        (2u64..40)
            .prop_flat_map(|q| (1..q, Just(q)))
            .prop_map(|(p, q)| rat(p, q))
    }

    proptest::proptest! {
        #[test]
        fn rational_schedule_is_periodic(a in coprime_pair()) {
            let DensityParam::Rational { p, q } = a else { unreachable!() };
            let s = Schedule::new(&a, 12 * q as usize).unwrap();
            for period in s.kinds.chunks(q as usize) {
                proptest::prop_assert_eq!(period, &s.kinds[..q as usize]);
                let products = period.iter().filter(|k| **k == Product).count() as u64;
                proptest::prop_assert_eq!(products, p);
            }
        }

        #[test]
        fn running_count_tracks_density(a in coprime_pair()) {
            let s = Schedule::new(&a, 100_000).unwrap();
            let DensityParam::Rational { p, q } = a else { unreachable!() };
            let mut count = 0i128;
            for (n, kind) in s.kinds.iter().enumerate() {
                if *kind == Product {
                    count += 1;
                }
                // |count - a·(n+1)| ≤ 1, scaled by q
                let diff = count * q as i128 - (n as i128 + 1) * p as i128;
                proptest::prop_assert!(diff.abs() <= q as i128);
            }
        }

        #[test]
        fn window_products_stay_in_range(a in coprime_pair(), q in 1u32..12, m in 0u64..500) {
            let w = window_profile(&a, q, m).unwrap();
            let exact = a.as_f64() * q as f64;
            proptest::prop_assert!(w.window.p as f64 >= exact.floor() && w.window.p as f64 <= exact.ceil());
        }
    }

    #[test]
    fn million_step_discrepancy() {
        for a in [rat(1, 2), rat(2, 5), rat(7, 19), golden()] {
            let s = Schedule::new(&a, 1_000_000).unwrap();
            let x = a.as_f64();
            let mut count = 0f64;
            for (n, kind) in s.kinds.iter().enumerate() {
                if *kind == Product {
                    count += 1.0;
                }
                assert!(
                    (count - x * (n as f64 + 1.0)).abs() <= 1.0 + 1e-9,
                    "a={a} n={n}"
                );
            }
        }
        for q in 1..30 {
            for m in 0..50 {
                window_profile(&golden(), q, m).unwrap();
            }
        }
    }
}
