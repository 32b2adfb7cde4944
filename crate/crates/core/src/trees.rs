//! Weighted ordered trees expanding `H_m = F_{Qm}`.
//!
//! A tree of height `m` whose internal vertices at depth `j` have degrees in
//! the support of the window map used at that depth contributes
//! `W(T)·(2+t)^{L(T)}`, where `W(T)` multiplies `C_{deg v}(t)` over internal
//! vertices. The root sits in the outermost window `m-1`; leaves stand for
//! `H_0 = 2 + t`. Summing over all trees reproduces `H_m` exactly.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::phi::PhiMap;
use crate::poly::{log2_biguint, TruncatedIntPolynomial};
use crate::recursion::{face_numbers, EngineKind};
use crate::schedule::{window_profile, DensityParam};

/// Default cap on enumerated trees.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Rooted tree with ordered children. Subtrees are shared, so full trees of
/// large height stay small in memory.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderedTree {
    children: Vec<Arc<OrderedTree>>,
}

impl OrderedTree {
    pub fn leaf() -> Self {
        OrderedTree {
            children: Vec::new(),
        }
    }

    pub fn node(children: Vec<OrderedTree>) -> Self {
        OrderedTree {
            children: children.into_iter().map(Arc::new).collect(),
        }
    }

    fn from_shared(children: Vec<Arc<OrderedTree>>) -> Self {
        OrderedTree { children }
    }

    /// Full tree whose vertices at depth `j` all have degree `degrees[j]`.
    pub fn full(degrees: &[usize]) -> Self {
        degrees.iter().rev().fold(OrderedTree::leaf(), |sub, &deg| {
            let sub = Arc::new(sub);
            OrderedTree {
                children: vec![sub; deg],
            }
        })
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.children.len()
    }

    pub fn children(&self) -> impl Iterator<Item = &OrderedTree> {
        self.children.iter().map(|c| c.as_ref())
    }

    /// Common depth of all leaves, or `None` if they differ.
    pub fn height(&self) -> Option<usize> {
        if self.is_leaf() {
            return Some(0);
        }
        let mut heights = self.children().map(OrderedTree::height);
        let first = heights.next()??;
        heights.all(|h| h == Some(first)).then_some(first + 1)
    }

    pub fn leaves(&self) -> u64 {
        if self.is_leaf() {
            1
        } else {
            self.children().map(OrderedTree::leaves).sum()
        }
    }

    pub fn internal(&self) -> u64 {
        if self.is_leaf() {
            0
        } else {
            1 + self.children().map(OrderedTree::internal).sum::<u64>()
        }
    }

    pub fn vertices(&self) -> u64 {
        self.leaves() + self.internal()
    }

    /// Calls `visit(depth, degree)` for every vertex in preorder.
    pub fn walk(&self, visit: &mut impl FnMut(usize, usize)) {
        fn go(t: &OrderedTree, depth: usize, visit: &mut impl FnMut(usize, usize)) {
            visit(depth, t.degree());
            for c in t.children() {
                go(c, depth + 1, visit);
            }
        }
        go(self, 0, visit)
    }

    /// Per-depth degree histogram (degree → count) without walking shared
    /// subtrees more than once per occurrence count.
    fn degree_counts(&self, height: usize) -> Vec<std::collections::BTreeMap<usize, u64>> {
        let mut levels = vec![std::collections::BTreeMap::new(); height + 1];
        fn go(
            t: &OrderedTree,
            depth: usize,
            mult: u64,
            levels: &mut [std::collections::BTreeMap<usize, u64>],
        ) {
            *levels[depth].entry(t.degree()).or_insert(0) += mult;
            // identical shared children are folded into one visit
            let mut i = 0;
            while i < t.children.len() {
                let mut j = i + 1;
                while j < t.children.len() && Arc::ptr_eq(&t.children[i], &t.children[j]) {
                    j += 1;
                }
                go(&t.children[i], depth + 1, mult * (j - i) as u64, levels);
                i = j;
            }
        }
        go(self, 0, 1, &mut levels);
        levels
    }
}

/// Window maps by depth: entry `j` serves vertices at depth `j`, i.e. window
/// `m - 1 - j`.
pub fn window_maps(a: &DensityParam, q: u32, m: u32) -> Result<Vec<PhiMap>> {
    (0..m)
        .map(|j| PhiMap::for_window(a, q, (m - 1 - j) as u64))
        .collect()
}

pub fn uniform_maps(phi: &PhiMap, m: u32) -> Vec<PhiMap> {
    vec![phi.clone(); m as usize]
}

/// Every ordered tree of height `m` with internal degrees in `support`.
pub fn enumerate_trees(m: u32, support: &[usize], budget: u64) -> Result<Vec<OrderedTree>> {
    let sets = vec![support.to_vec(); m as usize];
    enumerate_trees_by_depth(&sets, budget)
}

/// Every ordered tree of height `sets.len()` whose internal vertices at
/// depth `j` have degrees in `sets[j]`. Fails once more than `budget` trees
/// would be produced at any height.
pub fn enumerate_trees_by_depth(sets: &[Vec<usize>], budget: u64) -> Result<Vec<OrderedTree>> {
    let mut level: Vec<Arc<OrderedTree>> = vec![Arc::new(OrderedTree::leaf())];
    for degrees in sets.iter().rev() {
        if degrees.contains(&0) {
            return Err(usage("internal vertices need degree at least 1"));
        }
        let mut next: Vec<Arc<OrderedTree>> = Vec::new();
        for &k in degrees {
            let mut index = vec![0usize; k];
            loop {
                if next.len() as u64 >= budget {
                    return Err(Error::BudgetExceeded {
                        count: next.len() as u64 + 1,
                        budget,
                    });
                }
                let children = index.iter().map(|&i| Arc::clone(&level[i])).collect();
                next.push(Arc::new(OrderedTree::from_shared(children)));
                // odometer, last child varies fastest
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    index[pos] += 1;
                    if index[pos] < level.len() {
                        break;
                    }
                    index[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
        }
        level = next;
    }
    Ok(level
        .into_iter()
        .map(|t| Arc::try_unwrap(t).unwrap_or_else(|t| (*t).clone()))
        .collect())
}

fn check_height(tree: &OrderedTree, maps: &[PhiMap]) -> Result<()> {
    match tree.height() {
        Some(h) if h == maps.len() => Ok(()),
        Some(h) => Err(usage(format!(
            "tree has height {h}, expected {}",
            maps.len()
        ))),
        None => Err(usage("tree leaves are at different depths")),
    }
}

/// `W(T) = Π_{v internal} C_{deg v}(t)` truncated at `k_max`.
pub fn tree_weight(
    tree: &OrderedTree,
    maps: &[PhiMap],
    k_max: usize,
) -> Result<TruncatedIntPolynomial> {
    check_height(tree, maps)?;
    let counts = tree.degree_counts(maps.len());
    let mut w = TruncatedIntPolynomial::one(k_max);
    for (depth, histogram) in counts.iter().enumerate().take(maps.len()) {
        for (&deg, &count) in histogram {
            let c = maps[depth].coefficient(deg).ok_or_else(|| {
                usage(format!(
                    "degree {deg} at depth {depth} is outside the map support"
                ))
            })?;
            w = w.convolve(&c.retruncate(k_max).pow(count))?;
        }
    }
    Ok(w)
}

/// `W(T)(1)`, exact and untruncated.
pub fn tree_weight_at_one(tree: &OrderedTree, maps: &[PhiMap]) -> Result<BigUint> {
    check_height(tree, maps)?;
    let mut w = BigUint::one();
    for (depth, histogram) in tree
        .degree_counts(maps.len())
        .iter()
        .enumerate()
        .take(maps.len())
    {
        for (&deg, &count) in histogram {
            let c = maps[depth].coefficient(deg).ok_or_else(|| {
                usage(format!(
                    "degree {deg} at depth {depth} is outside the map support"
                ))
            })?;
            w *= c.eval_at_one().pow(count as u32);
        }
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelStats {
    /// `N_j`: vertices at depth `j`.
    pub vertices: u64,
    /// `Q_j`: internal vertices at depth `j` whose degree is not `2^p`.
    pub atypical: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeStats {
    pub leaves: u64,
    pub internal: u64,
    /// `Q(T)`.
    pub atypical: u64,
    pub levels: Vec<LevelStats>,
    pub weight: TruncatedIntPolynomial,
}

pub fn tree_stats(tree: &OrderedTree, maps: &[PhiMap], k_max: usize) -> Result<TreeStats> {
    let weight = tree_weight(tree, maps, k_max)?;
    let counts = tree.degree_counts(maps.len());
    let levels: Vec<LevelStats> = counts
        .iter()
        .enumerate()
        .map(|(depth, histogram)| LevelStats {
            vertices: histogram.values().sum(),
            atypical: match maps.get(depth) {
                Some(phi) => histogram
                    .iter()
                    .filter(|(deg, _)| **deg != 0 && **deg != phi.typical_degree())
                    .map(|(_, c)| c)
                    .sum(),
                None => 0,
            },
        })
        .collect();
    Ok(TreeStats {
        leaves: tree.leaves(),
        internal: tree.internal(),
        atypical: levels.iter().map(|l| l.atypical).sum(),
        levels,
        weight,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeafBound {
    /// `N_{j+1} ≤ 2^{p} N_j + 2^Q Q_j` at every depth.
    pub levels_ok: bool,
    /// Start depth `h = min(⌊log_{2^Q} k⌋, m)` of the iterated bound.
    pub start_depth: u32,
    /// Iterated bound on `L(T)` from depth `h` down to the leaves.
    pub bound: u128,
    pub holds: bool,
}

/// Tree statistics plus the per-level leaf growth check and the iterated
/// leaf bound for coefficient index `k`.
pub fn atypical_count_and_leaf_bound(
    tree: &OrderedTree,
    maps: &[PhiMap],
    k: u64,
) -> Result<(TreeStats, LeafBound)> {
    let stats = tree_stats(tree, maps, 0)?;
    let m = maps.len();
    let mut levels_ok = true;
    for (j, phi) in maps.iter().enumerate() {
        let q = phi.len() as u32;
        let p = phi.products();
        let n = stats.levels[j].vertices as u128;
        let qj = stats.levels[j].atypical as u128;
        levels_ok &= (stats.levels[j + 1].vertices as u128) <= (n << p) + (qj << q);
    }
    let q = maps.iter().map(PhiMap::len).max().unwrap_or(1) as u32;
    let mut h = 0u32;
    while (h as usize) < m && (1u128 << (q * (h + 1))) <= k as u128 {
        h += 1;
    }
    let mut bound = stats.levels[h as usize].vertices as u128;
    for (phi, level) in maps.iter().zip(&stats.levels).skip(h as usize) {
        bound = (bound << phi.products()) + ((level.atypical as u128) << phi.len());
    }
    let holds = stats.leaves as u128 <= bound;
    Ok((
        stats,
        LeafBound {
            levels_ok,
            start_depth: h,
            bound,
            holds,
        },
    ))
}

/// `C(n, r)` as a big integer.
pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `(2 + t)^L` truncated at `k_max`.
pub fn leaf_power(leaves: u64, k_max: usize) -> TruncatedIntPolynomial {
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut binom = BigUint::one();
    for j in 0..=k_max as u64 {
        if j > leaves {
            break;
        }
        coeffs.push(&binom << (leaves - j) as usize);
        binom = binom * (leaves - j) / (j + 1);
    }
    TruncatedIntPolynomial::from_coeffs(coeffs, k_max)
}

#[derive(Clone, Debug)]
pub struct TreeRecord {
    pub tree: OrderedTree,
    pub stats: TreeStats,
    pub weight_at_one: BigUint,
}

#[derive(Clone, Debug)]
pub struct TreeSumReport {
    pub trees: Vec<TreeRecord>,
    /// `Σ_T W(T)(2+t)^{L(T)}`.
    pub tree_sum: TruncatedIntPolynomial,
    /// Coefficients from the binomial coefficient formula.
    pub formula: Vec<BigUint>,
    /// Coefficients of `H_m` from the paper engine.
    pub engine: TruncatedIntPolynomial,
    /// Dropping trees with `Q(T) > k` leaves coefficient `k` unchanged, for every `k`.
    pub atypical_filter_ok: bool,
    /// `log2 W(T)(1) ≤ 2^Q |Int(T)|` for every tree.
    pub weight_bound_ok: bool,
    /// `|Int(T)| ≤ L(T) - 1` for every tree (checked when all degrees are ≥ 2).
    pub internal_bound_ok: bool,
}

/// Coefficient formula: `Σ_{j ≤ k} Σ_T [t^j]W(T) · C(L, k-j) · 2^{L-(k-j)}`,
/// with weights of trees sharing a leaf count summed first.
fn coefficient_formula(records: &[TreeRecord], k_max: usize) -> Result<Vec<BigUint>> {
    let mut by_leaves: std::collections::BTreeMap<u64, TruncatedIntPolynomial> = Default::default();
    for rec in records {
        let slot = by_leaves
            .entry(rec.stats.leaves)
            .or_insert_with(|| TruncatedIntPolynomial::zero(k_max));
        *slot = slot.add(&rec.stats.weight)?;
    }
    let mut out = vec![BigUint::zero(); k_max + 1];
    for (&l, w) in &by_leaves {
        let terms: Vec<BigUint> = (0..=k_max as u64)
            .map(|r| {
                if r > l {
                    BigUint::zero()
                } else {
                    binomial(l, r) << (l - r) as usize
                }
            })
            .collect();
        for (k, slot) in out.iter_mut().enumerate() {
            for j in 0..=k {
                let wj = w.coeff(j);
                if !wj.is_zero() {
                    *slot += wj * &terms[k - j];
                }
            }
        }
    }
    Ok(out)
}

/// Enumerates all trees for `H_m` and checks the tree sum and the
/// coefficient formula against the paper engine.
pub fn tree_sum_check(
    a: &DensityParam,
    q: u32,
    m: u32,
    k_max: usize,
    budget: u64,
) -> Result<TreeSumReport> {
    let maps = window_maps(a, q, m)?;
    let engine = face_numbers(a, q * m, k_max, EngineKind::PaperExact)?;
    let engine = engine.exact().unwrap().clone();
    tree_sum_against(&maps, engine, budget)
}

/// Same as [`tree_sum_check`] for explicit per-depth maps and an expected `H_m`.
pub fn tree_sum_against(
    maps: &[PhiMap],
    engine: TruncatedIntPolynomial,
    budget: u64,
) -> Result<TreeSumReport> {
    let k_max = engine.k_max();
    let sets: Vec<Vec<usize>> = maps.iter().map(PhiMap::support).collect();
    let trees = enumerate_trees_by_depth(&sets, budget)?;
    let mut records = Vec::with_capacity(trees.len());
    let mut tree_sum = TruncatedIntPolynomial::zero(k_max);
    let mut contributions = Vec::with_capacity(trees.len());
    let (mut weight_bound_ok, mut internal_bound_ok) = (true, true);
    for tree in trees {
        let stats = tree_stats(&tree, maps, k_max)?;
        let weight_at_one = tree_weight_at_one(&tree, maps)?;
        let contribution = stats.weight.convolve(&leaf_power(stats.leaves, k_max))?;
        tree_sum = tree_sum.add(&contribution)?;
        let q = maps.iter().map(PhiMap::len).max().unwrap_or(1);
        let cap = BigUint::one() << (stats.internal as usize * (1usize << q));
        weight_bound_ok &= weight_at_one <= cap;
        let min_degree = sets.iter().flatten().min().copied().unwrap_or(2);
        if min_degree >= 2 {
            internal_bound_ok &= stats.internal < stats.leaves;
        }
        contributions.push((stats.atypical, contribution));
        records.push(TreeRecord {
            tree,
            stats,
            weight_at_one,
        });
    }
    let atypical_filter_ok = (0..=k_max).all(|k| {
        let filtered: BigUint = contributions
            .iter()
            .filter(|(atypical, _)| *atypical <= k as u64)
            .map(|(_, c)| c.coeff(k))
            .sum();
        &filtered == tree_sum.coeff(k)
    });
    let formula = coefficient_formula(&records, k_max)?;
    if let Some(k) = (0..=k_max).find(|&k| tree_sum.coeff(k) != engine.coeff(k)) {
        return Err(Error::Verification(format!(
            "tree sum differs from H_m at t^{k}: {} vs {}",
            tree_sum.coeff(k),
            engine.coeff(k)
        )));
    }
    if let Some(k) = (0..=k_max).find(|&k| &formula[k] != engine.coeff(k)) {
        return Err(Error::Verification(format!(
            "coefficient formula differs from H_m at t^{k}: {} vs {}",
            formula[k],
            engine.coeff(k)
        )));
    }
    Ok(TreeSumReport {
        trees: records,
        tree_sum,
        formula,
        engine,
        atypical_filter_ok,
        weight_bound_ok,
        internal_bound_ok,
    })
}

/// Preorder word: `0` for a leaf, `1 + index of the degree in support` otherwise.
pub fn preorder_encode(tree: &OrderedTree, support: &[usize]) -> Result<Vec<usize>> {
    let mut word = Vec::new();
    let mut bad = None;
    tree.walk(&mut |_, deg| {
        if deg == 0 {
            word.push(0);
        } else {
            match support.iter().position(|&k| k == deg) {
                Some(i) => word.push(i + 1),
                None => bad = Some(deg),
            }
        }
    });
    match bad {
        Some(deg) => Err(usage(format!("degree {deg} is outside the support"))),
        None => Ok(word),
    }
}

pub fn preorder_decode(word: &[usize], support: &[usize]) -> Result<OrderedTree> {
    fn go(word: &[usize], pos: &mut usize, support: &[usize]) -> Result<OrderedTree> {
        let letter = *word
            .get(*pos)
            .ok_or_else(|| usage("preorder word ended early"))?;
        *pos += 1;
        if letter == 0 {
            return Ok(OrderedTree::leaf());
        }
        let deg = *support
            .get(letter - 1)
            .ok_or_else(|| usage(format!("letter {letter} is outside the alphabet")))?;
        let children = (0..deg)
            .map(|_| go(word, pos, support))
            .collect::<Result<Vec<_>>>()?;
        Ok(OrderedTree::node(children))
    }
    let mut pos = 0;
    let tree = go(word, &mut pos, support)?;
    if pos != word.len() {
        return Err(usage("trailing letters after a complete tree"));
    }
    Ok(tree)
}

/// The explicit tree used for the lower bound: full `2^Q`-ary at depths
/// `< h`, full `2^p`-ary from depth `h` down to the leaves.
#[derive(Clone, Debug)]
pub struct LowerBoundTree {
    pub tree: OrderedTree,
    pub h: u32,
    /// `λ·(2^Q)^h`.
    pub jstar: u64,
    /// Number of degree-`2^Q` vertices, `Σ_{i<h} (2^Q)^i`.
    pub top_vertices: u64,
    /// `λ · top_vertices`: the t-exponent actually carried by `W(T_m)`.
    pub weight_exponent: u64,
    pub leaves: u64,
    /// `Q(T_m)`.
    pub atypical: u64,
}

pub fn build_lower_bound_tree(
    q: u32,
    p: u32,
    lambda: u64,
    m: u32,
    k: u64,
) -> Result<LowerBoundTree> {
    if lambda == 0 || p >= q {
        return Err(usage(
            "the lower-bound tree needs a window containing a hull step (λ ≥ 1, p < Q)",
        ));
    }
    if k < 2 * lambda {
        return Err(usage(format!("need k ≥ 2λ, got k={k}, λ={lambda}")));
    }
    let mut h = 0u32;
    while (2 * lambda as u128) << (q * (h + 1)) <= k as u128 {
        h += 1;
    }
    if m <= h {
        return Err(usage(format!(
            "need m > h = ⌊log_(2^Q)(k/2λ)⌋; got m={m}, h={h}"
        )));
    }
    let leaf_bits = q as u64 * h as u64 + p as u64 * (m - h) as u64;
    if leaf_bits >= 63 {
        return Err(usage("lower-bound tree too large (more than 2^62 leaves)"));
    }
    let degrees: Vec<usize> = (0..m)
        .map(|j| if j < h { 1usize << q } else { 1usize << p })
        .collect();
    let tree = OrderedTree::full(&degrees);
    let top_vertices: u64 = (0..h).map(|i| 1u64 << (q * i)).sum();
    let jstar = lambda << (q * h);
    let lb = LowerBoundTree {
        tree,
        h,
        jstar,
        top_vertices,
        weight_exponent: lambda * top_vertices,
        leaves: 1u64 << leaf_bits,
        atypical: top_vertices,
    };
    if 2 * lb.jstar > k || lb.atypical > k {
        return Err(Error::Verification(format!(
            "lower-bound tree violates j* ≤ k/2 or Q(T) ≤ k (j*={}, Q(T)={}, k={k})",
            lb.jstar, lb.atypical
        )));
    }
    Ok(lb)
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundCertificate {
    pub h: u32,
    pub jstar: u64,
    pub weight_exponent: u64,
    pub leaves: u64,
    pub atypical: u64,
    /// `L(T_m) > 2k`.
    pub leaves_exceed_2k: bool,
    /// `log2 2^{L-k} = L - k`.
    pub bound_log2: i64,
    /// `[t^j]W(T_m) · C(L, k-j) · 2^{L-(k-j)}` at `j = weight_exponent`.
    #[serde(serialize_with = "crate::serialize_biguint")]
    pub certified: BigUint,
}

impl LowerBoundCertificate {
    pub fn certified_log2(&self) -> f64 {
        log2_biguint(&self.certified)
    }
}

/// Certified lower bound on `a_{Qm,k}` from the single tree `T_m` built for
/// a uniform window map.
pub fn lower_bound_value(phi: &PhiMap, m: u32, k: u64) -> Result<LowerBoundCertificate> {
    let top = phi.tfree_and_top()?;
    let q = phi.len() as u32;
    let lb = build_lower_bound_tree(q, top.p, top.lambda as u64, m, k)?;
    let k_max = k as usize;
    let typical_internal = lb.tree.internal() - lb.top_vertices;
    let weight = phi
        .coefficient(1 << top.p)
        .unwrap()
        .retruncate(k_max)
        .pow(typical_internal)
        .convolve(
            &phi.coefficient(1 << q)
                .unwrap()
                .retruncate(k_max)
                .pow(lb.top_vertices),
        )?;
    let j = lb.weight_exponent as usize;
    if j > k_max || weight.lowest_degree() != Some(j) || weight.coeff(j).is_zero() {
        return Err(Error::Verification(format!(
            "W(T_m) does not start at t^{j} with a positive coefficient"
        )));
    }
    let r = k - j as u64;
    let certified = if r > lb.leaves {
        BigUint::zero()
    } else {
        weight.coeff(j) * binomial(lb.leaves, r) * (BigUint::one() << (lb.leaves - r) as usize)
    };
    Ok(LowerBoundCertificate {
        h: lb.h,
        jstar: lb.jstar,
        weight_exponent: lb.weight_exponent,
        leaves: lb.leaves,
        atypical: lb.atypical,
        leaves_exceed_2k: lb.leaves > 2 * k,
        bound_log2: lb.leaves as i64 - k as i64,
        certified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    #[serde(flatten)]
    pub certificate: LowerBoundCertificate,
    pub certified_log2: f64,
    pub engine_log2: f64,
    /// Engine value is at least the certified value and at least `2^{L-k}`.
    pub holds: bool,
}

/// Lower bound for density `a` with window length `q`, compared against the
/// paper engine's `a_{qm,k}`.
pub fn lower_bound_report(a: &DensityParam, q: u32, m: u32, k: u64) -> Result<LowerBoundReport> {
    let first = window_profile(a, q, 0)?;
    for w in 1..m as u64 {
        if window_profile(a, q, w)?.word != first.word {
            return Err(usage(
                "the lower-bound tree needs identical windows; use Q = denominator of a",
            ));
        }
    }
    let phi = PhiMap::for_window(a, q, 0)?;
    let certificate = lower_bound_value(&phi, m, k)?;
    let engine = face_numbers(a, q * m, k as usize, EngineKind::PaperExact)?;
    let value = engine.exact().unwrap().coeff(k as usize).clone();
    let pow_ok =
        certificate.bound_log2 < 0 || value >= BigUint::one() << certificate.bound_log2 as usize;
    Ok(LowerBoundReport {
        certified_log2: certificate.certified_log2(),
        engine_log2: log2_biguint(&value),
        holds: value >= certificate.certified && pow_ok,
        certificate,
    })
}

/// `log2 a_{Qm,k} / (2^{m·p} · k^{1 - p/Q})`.
pub fn upper_bound_ratio(log2_coeff: f64, q: u32, p: u32, m: u64, k: u64) -> f64 {
    let scale = 2f64.powf(m as f64 * p as f64) * (k as f64).powf(1.0 - p as f64 / q as f64);
    log2_coeff / scale
}

/// Envelope ratio for `a_{Qm,k}` computed with the paper engine.
pub fn upper_bound_report(a: &DensityParam, q: u32, m: u32, k: u64) -> Result<f64> {
    let p = window_profile(a, q, m as u64)?.window.p;
    let engine = face_numbers(a, q * m, k as usize, EngineKind::PaperExact)?;
    let log2 = engine.log2_coeff(k as usize);
    Ok(upper_bound_ratio(log2, q, p, m as u64, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{compose_window, parse_word};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn rat(p: u64, q: u64) -> DensityParam {
        DensityParam::rational(p, q).unwrap()
    }

    fn sr() -> PhiMap {
        compose_window(&parse_word("SR").unwrap(), 4).unwrap()
    }

    fn u64s(p: &TruncatedIntPolynomial) -> Vec<u64> {
        p.coeffs().iter().map(|c| c.to_u64().unwrap()).collect()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_trees(0, &[2, 4], 10).unwrap().len(), 1);
        assert_eq!(enumerate_trees(1, &[2, 4], 10).unwrap().len(), 2);
        let trees = enumerate_trees(2, &[2, 4], 100).unwrap();
        assert_eq!(trees.len(), 20);
        let unique: std::collections::HashSet<_> = trees.iter().collect();
        assert_eq!(unique.len(), 20);
        assert!(trees.iter().all(|t| t.height() == Some(2)));
    }

    #[test]
    fn enumeration_budget() {
        let err = enumerate_trees(2, &[2, 4], 19).unwrap_err();
        assert_eq!(
            err,
            Error::BudgetExceeded {
                count: 20,
                budget: 19
            }
        );
    }

    #[test]
    fn weights() {
        let maps = uniform_maps(&sr(), 1);
        assert_eq!(
            u64s(&tree_weight(&OrderedTree::leaf(), &[], 3).unwrap()),
            vec![1, 0, 0, 0]
        );
        let quad = OrderedTree::full(&[4]);
        assert_eq!(
            u64s(&tree_weight(&quad, &maps, 3).unwrap()),
            vec![0, 1, 0, 0]
        );
        let bin = OrderedTree::full(&[2]);
        assert_eq!(
            u64s(&tree_weight(&bin, &maps, 3).unwrap()),
            vec![2, 0, 0, 0]
        );
        let tri = OrderedTree::full(&[3]);
        assert!(matches!(tree_weight(&tri, &maps, 3), Err(Error::Usage(_))));
    }

    #[test]
    fn tree_sum_examples() {
        let a = rat(1, 2);
        let report = tree_sum_check(&a, 2, 1, 8, DEFAULT_BUDGET).unwrap();
        assert_eq!(u64s(&report.tree_sum), vec![8, 24, 34, 24, 8, 1, 0, 0, 0]);
        let report = tree_sum_check(&a, 2, 0, 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(u64s(&report.tree_sum), vec![2, 1, 0, 0, 0]);
        let report = tree_sum_check(&a, 2, 2, 16, DEFAULT_BUDGET).unwrap();
        assert_eq!(report.trees.len(), 20);
        assert!(report.atypical_filter_ok && report.weight_bound_ok && report.internal_bound_ok);
    }

    #[test]
    fn tree_sum_with_varying_windows() {
        for (a, q, m) in [
            (rat(2, 5), 2, 3),
            (rat(1, 3), 2, 2),
            (rat(2, 3), 3, 1),
            (rat(1, 2), 1, 3),
        ] {
            let report = tree_sum_check(&a, q, m, 16, DEFAULT_BUDGET).unwrap();
            assert!(
                report.atypical_filter_ok && report.weight_bound_ok,
                "{a} Q={q} m={m}"
            );
        }
    }

    #[test]
    fn tree_sum_detects_mismatch() {
        let maps = uniform_maps(&sr(), 1);
        let wrong = TruncatedIntPolynomial::from_u64s(&[8, 24, 33], 4);
        assert!(matches!(
            tree_sum_against(&maps, wrong, 100),
            Err(Error::Verification(_))
        ));
    }

    #[test]
    fn stats_examples() {
        let phi = sr();
        // full 2^p-ary tree: no atypical vertices
        let t = OrderedTree::full(&[2, 2, 2]);
        let (stats, bound) = atypical_count_and_leaf_bound(&t, &uniform_maps(&phi, 3), 8).unwrap();
        assert_eq!(stats.atypical, 0);
        assert_eq!(
            stats.levels.iter().map(|l| l.vertices).collect::<Vec<_>>(),
            vec![1, 2, 4, 8]
        );
        assert!(bound.levels_ok && bound.holds);
        // full 2^Q-ary tree: every internal vertex is atypical
        let t = OrderedTree::full(&[4, 4, 4]);
        let (stats, bound) = atypical_count_and_leaf_bound(&t, &uniform_maps(&phi, 3), 64).unwrap();
        assert_eq!(stats.atypical, (64 - 1) / 3);
        assert!(bound.levels_ok && bound.holds);
        assert_eq!(
            stats.leaves,
            1 + (0..stats.internal).map(|_| 3).sum::<u64>()
        );
    }

    #[test]
    fn preorder_examples() {
        let support = [2, 4];
        assert_eq!(
            preorder_encode(&OrderedTree::leaf(), &support).unwrap(),
            vec![0]
        );
        let trees = enumerate_trees(1, &support, 10).unwrap();
        let words: Vec<_> = trees
            .iter()
            .map(|t| preorder_encode(t, &support).unwrap())
            .collect();
        assert_ne!(words[0], words[1]);
        assert!(preorder_decode(&[1, 0], &support).is_err());
        assert!(preorder_decode(&[1, 0, 0, 0], &support).is_err());
        assert!(preorder_decode(&[3], &support).is_err());
    }

    #[test]
    fn preorder_is_injective_on_enumerations() {
        let support = [1, 2, 3];
        let trees = enumerate_trees(3, &support, 1_000_000).unwrap();
        let words: std::collections::HashSet<_> = trees
            .iter()
            .map(|t| preorder_encode(t, &support).unwrap())
            .collect();
        assert_eq!(words.len(), trees.len());
    }

    fn random_tree(depth: u32, support: Vec<usize>) -> BoxedStrategy<OrderedTree> {
        if depth == 0 {
            return Just(OrderedTree::leaf()).boxed();
        }
        proptest::sample::select(support.clone())
            .prop_flat_map(move |deg| {
                proptest::collection::vec(random_tree(depth - 1, support.clone()), deg)
            })
            .prop_map(OrderedTree::node)
            .boxed()
    }

    proptest! {
        #[test]
        fn preorder_round_trip(t in (0u32..=3).prop_flat_map(|m| random_tree(m, vec![1, 2, 4]))) {
            let support = [1, 2, 4];
            let word = preorder_encode(&t, &support).unwrap();
            prop_assert_eq!(word.len() as u64, t.vertices());
            prop_assert_eq!(preorder_decode(&word, &support).unwrap(), t);
        }
    }

    #[test]
    fn lower_bound_tree_examples() {
        let lb = build_lower_bound_tree(2, 1, 1, 3, 8).unwrap();
        assert_eq!((lb.h, lb.leaves, lb.jstar), (1, 16, 4));
        assert_eq!(lb.tree.degree(), 4);
        assert_eq!(lb.tree.children().next().unwrap().degree(), 2);
        assert_eq!(lb.tree.leaves(), 16);
        assert!(matches!(
            build_lower_bound_tree(2, 1, 1, 2, 32),
            Err(Error::Usage(_))
        ));
        let lb = build_lower_bound_tree(3, 1, 3, 2, 48).unwrap();
        assert_eq!((lb.h, lb.leaves, lb.jstar), (1, 16, 24));
        assert!(matches!(
            build_lower_bound_tree(2, 1, 3, 3, 5),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn lower_bound_tree_stats_agree() {
        let phi = sr();
        let lb = build_lower_bound_tree(2, 1, 1, 4, 40).unwrap();
        let (stats, _) =
            atypical_count_and_leaf_bound(&lb.tree, &uniform_maps(&phi, 4), 40).unwrap();
        assert_eq!(stats.atypical, lb.atypical);
        assert_eq!(stats.leaves, lb.leaves);
        let w = tree_weight(&lb.tree, &uniform_maps(&phi, 4), 40).unwrap();
        assert_eq!(w.lowest_degree(), Some(lb.weight_exponent as usize));
    }

    #[test]
    fn lower_bound_values() {
        let a = rat(1, 2);
        let report = lower_bound_report(&a, 2, 3, 8).unwrap();
        assert_eq!(report.certificate.bound_log2, 8);
        assert!(report.holds);
        assert!(report.engine_log2 >= 8.0);
        // m = h + 1: the power-of-two bound may be below 1 and still valid
        let report = lower_bound_report(&a, 2, 2, 8).unwrap();
        assert_eq!(report.certificate.h, 1);
        assert!(report.certificate.bound_log2 <= 0);
        assert!(report.holds);
        let report = lower_bound_report(&rat(1, 3), 3, 3, 48).unwrap();
        assert!(report.holds, "{report:?}");
    }

    #[test]
    fn upper_ratio_examples() {
        let a = rat(1, 2);
        let rho = upper_bound_report(&a, 2, 3, 8).unwrap();
        let value = face_numbers(&a, 6, 8, EngineKind::PaperExact)
            .unwrap()
            .log2_coeff(8);
        assert!((rho - value / (8.0 * 8f64.sqrt())).abs() < 1e-12);
        let rho1 = upper_bound_report(&a, 2, 3, 1).unwrap();
        let value = face_numbers(&a, 6, 1, EngineKind::PaperExact)
            .unwrap()
            .log2_coeff(1);
        assert!((rho1 - value / 8.0).abs() < 1e-12);
    }

    #[test]
    fn binomials_and_leaf_powers() {
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(binomial(3, 10), BigUint::zero());
        assert_eq!(u64s(&leaf_power(2, 4)), vec![4, 4, 1, 0, 0]);
    }
}
