//! Window maps `φ(x) = T_{Q-1} ∘ … ∘ T_0 (x)` with `S(x) = x²` for product
//! steps and `R(x) = t·x² + 2x` for hull steps.
//!
//! Words are stored innermost first: `word[0]` is applied to `x` first. The
//! result is kept as `Σ_k C_k(t) x^k` with each `C_k` a general polynomial
//! in `t`; e.g. the word `R S R` gives `C_4 = 16t + 2t²`, which is not a
//! monomial.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{usage, Error, Result};
use crate::poly::TruncatedIntPolynomial;
use crate::schedule::{window_profile, DensityParam, StepKind};

/// Longest word [`compose_window`] accepts.
pub const MAX_WORD_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiMap {
    word: Vec<StepKind>,
    terms: BTreeMap<usize, TruncatedIntPolynomial>,
    t_truncation: usize,
}

/// The two distinguished terms `A·x^{2^p}` and `B·t^λ·x^{2^Q}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopTerms {
    pub a: BigUint,
    pub p: u32,
    pub b: BigUint,
    pub lambda: usize,
}

/// Parses a word over `{S, R}` (innermost first).
pub fn parse_word(s: &str) -> Result<Vec<StepKind>> {
    s.trim()
        .chars()
        .filter(|c| !matches!(c, ',' | ' '))
        .map(|c| match c.to_ascii_uppercase() {
            'S' | 'P' => Ok(StepKind::Product),
            'R' | 'H' => Ok(StepKind::Hull),
            other => Err(usage(format!(
                "unexpected letter {other:?} in word (use S/R)"
            ))),
        })
        .collect()
}

pub fn word_string(word: &[StepKind]) -> String {
    word.iter().map(|k| k.map_letter()).collect()
}

/// One sparse term `coeff · x^x_deg · t^t_deg`.
type Term = (usize, usize, BigUint);

fn square_terms(terms: &[Term], hull: bool) -> Vec<Term> {
    let max_x = terms.iter().map(|t| t.0).max().unwrap_or(0);
    let max_t = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let width = 2 * max_t + 2;
    let mut grid = vec![BigUint::zero(); (2 * max_x + 1) * width];
    for (i, (xi, ti, ci)) in terms.iter().enumerate() {
        grid[2 * xi * width + 2 * ti + hull as usize] += ci * ci;
        for (xj, tj, cj) in &terms[i + 1..] {
            grid[(xi + xj) * width + ti + tj + hull as usize] += (ci * cj) << 1u32;
        }
    }
    if hull {
        for (x, t, c) in terms {
            grid[x * width + t] += c * 2u32;
        }
    }
    grid.into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(idx, c)| (idx / width, idx % width, c))
        .collect()
}

/// Symbolically composes the word; every `C_k` is truncated at `t_truncation`.
pub fn compose_window(word: &[StepKind], t_truncation: usize) -> Result<PhiMap> {
    if word.is_empty() {
        return Err(usage("window word must be nonempty"));
    }
    if word.len() > MAX_WORD_LEN {
        return Err(usage(format!(
            "window words are limited to {MAX_WORD_LEN} letters"
        )));
    }
    if t_truncation < 1 << word.len() {
        return Err(usage(format!(
            "t truncation {t_truncation} is below 2^{} = {}",
            word.len(),
            1usize << word.len()
        )));
    }
    let mut terms: Vec<Term> = vec![(1, 0, BigUint::from(1u32))];
    for kind in word {
        terms = square_terms(&terms, *kind == StepKind::Hull);
    }
    let mut grouped: BTreeMap<usize, Vec<BigUint>> = BTreeMap::new();
    for (x, t, c) in terms {
        let column = grouped.entry(x).or_default();
        if column.len() <= t {
            column.resize(t + 1, BigUint::zero());
        }
        column[t] = c;
    }
    let terms = grouped
        .into_iter()
        .map(|(x, column)| (x, TruncatedIntPolynomial::from_coeffs(column, t_truncation)))
        .collect();
    Ok(PhiMap {
        word: word.to_vec(),
        terms,
        t_truncation,
    })
}

impl PhiMap {
    /// Map of window `m` of length `q` for density `a`.
    pub fn for_window(a: &DensityParam, q: u32, m: u64) -> Result<Self> {
        let profile = window_profile(a, q, m)?;
        compose_window(&profile.word, 1 << q)
    }

    pub fn word(&self) -> &[StepKind] {
        &self.word
    }

    /// Word length `Q`.
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// Number of `S` letters.
    pub fn products(&self) -> u32 {
        self.word
            .iter()
            .filter(|k| **k == StepKind::Product)
            .count() as u32
    }

    pub fn t_truncation(&self) -> usize {
        self.t_truncation
    }

    /// Support `K`: x-degrees with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.terms.keys().copied().collect()
    }

    pub fn terms(&self) -> &BTreeMap<usize, TruncatedIntPolynomial> {
        &self.terms
    }

    pub fn coefficient(&self, x_degree: usize) -> Option<&TruncatedIntPolynomial> {
        self.terms.get(&x_degree)
    }

    pub fn max_degree(&self) -> usize {
        *self.terms.keys().next_back().unwrap()
    }

    pub fn min_degree(&self) -> usize {
        *self.terms.keys().next().unwrap()
    }

    /// Degree `2^p` of the unique `t`-free term.
    pub fn typical_degree(&self) -> usize {
        1 << self.products()
    }

    /// Extracts `A`, `p`, `B`, `λ`, checking that `x^{2^p}` is the only
    /// x-degree whose coefficient has a constant term and that the top
    /// coefficient is a monomial.
    pub fn tfree_and_top(&self) -> Result<TopTerms> {
        let p = self.products();
        let typical = 1usize << p;
        for (k, c) in &self.terms {
            let t_free = !c.coeff(0).is_zero();
            if t_free != (*k == typical) {
                return Err(Error::Verification(format!(
                    "word {}: x^{k} has {} constant term",
                    word_string(&self.word),
                    if t_free { "an unexpected" } else { "no" }
                )));
            }
        }
        let a = self.terms[&typical].coeff(0).clone();
        let top = &self.terms[&self.max_degree()];
        let lambda = top.lowest_degree().unwrap();
        if top.degree() != Some(lambda) {
            return Err(Error::Verification(format!(
                "word {}: top coefficient is not a monomial",
                word_string(&self.word)
            )));
        }
        Ok(TopTerms {
            a,
            p,
            b: top.coeff(lambda).clone(),
            lambda,
        })
    }

    /// `Σ_k C_k(t) F(t)^k`, truncated at the bound of `f`.
    pub fn apply(&self, f: &TruncatedIntPolynomial) -> Result<TruncatedIntPolynomial> {
        let k_max = f.k_max();
        let mut acc = TruncatedIntPolynomial::zero(k_max);
        let mut power = TruncatedIntPolynomial::one(k_max);
        let mut reached = 0usize;
        for (k, c) in &self.terms {
            while reached < *k {
                power = power.convolve(f)?;
                reached += 1;
            }
            acc = acc.add(&c.retruncate(k_max).convolve(&power)?)?;
        }
        Ok(acc)
    }
}

pub fn apply_phi(phi: &PhiMap, f: &TruncatedIntPolynomial) -> Result<TruncatedIntPolynomial> {
    phi.apply(f)
}
