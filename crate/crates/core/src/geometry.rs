//! Small-dimension geometry oracle for `P_n^a`.
//!
//! Polytopes are held as vertex lists and facet normals `u` (facets are
//! `{x : u·x = 1}`); every coordinate in this family is an integer. Faces
//! come from closing the facet incidence sets under intersection.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::recursion::{face_numbers, EngineKind};
use crate::schedule::{DensityParam, Schedule, StepKind};

pub const MAX_DIM: usize = 16;
/// Cap on the number of faces (`3^d` for this family) the lattice may hold.
pub const FACE_GUARD: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VPolytope {
    pub dim: usize,
    pub vertices: Vec<Vec<i64>>,
    pub facet_normals: Vec<Vec<i64>>,
}

fn concat(x: &[i64], y: &[i64]) -> Vec<i64> {
    x.iter().chain(y).copied().collect()
}

fn pad_left(x: &[i64], zeros: usize) -> Vec<i64> {
    std::iter::repeat_n(0, zeros)
        .chain(x.iter().copied())
        .collect()
}

fn pad_right(x: &[i64], zeros: usize) -> Vec<i64> {
    x.iter()
        .copied()
        .chain(std::iter::repeat_n(0, zeros))
        .collect()
}

fn dot(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm_sq(x: &[i64]) -> u64 {
    x.iter().map(|c| (c * c) as u64).sum()
}

impl VPolytope {
    /// `[-1, 1] ⊂ ℝ`.
    pub fn segment() -> Self {
        VPolytope {
            dim: 1,
            vertices: vec![vec![1], vec![-1]],
            facet_normals: vec![vec![1], vec![-1]],
        }
    }

    fn check_dim(d: usize) -> Result<()> {
        if d > MAX_DIM {
            return Err(Error::Guard(format!(
                "dimension {d} exceeds the oracle cap {MAX_DIM}"
            )));
        }
        Ok(())
    }

    /// Cartesian product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let dim = self.dim + other.dim;
        Self::check_dim(dim)?;
        let vertices = self
            .vertices
            .iter()
            .flat_map(|v| other.vertices.iter().map(move |w| concat(v, w)))
            .collect();
        let facet_normals = self
            .facet_normals
            .iter()
            .map(|u| pad_right(u, other.dim))
            .chain(other.facet_normals.iter().map(|u| pad_left(u, self.dim)))
            .collect();
        Ok(VPolytope {
            dim,
            vertices,
            facet_normals,
        })
    }

    /// Free sum: convex hull of the two polytopes in complementary coordinates.
    pub fn free_sum(&self, other: &Self) -> Result<Self> {
        let dim = self.dim + other.dim;
        Self::check_dim(dim)?;
        let vertices = self
            .vertices
            .iter()
            .map(|v| pad_right(v, other.dim))
            .chain(other.vertices.iter().map(|w| pad_left(w, self.dim)))
            .collect();
        let facet_normals = self
            .facet_normals
            .iter()
            .flat_map(|u| other.facet_normals.iter().map(move |w| concat(u, w)))
            .collect();
        Ok(VPolytope {
            dim,
            vertices,
            facet_normals,
        })
    }

    pub fn is_centrally_symmetric(&self) -> bool {
        let set: HashSet<&Vec<i64>> = self.vertices.iter().collect();
        self.vertices
            .iter()
            .all(|v| set.contains(&v.iter().map(|c| -c).collect::<Vec<_>>()))
    }

    /// Every vertex lies in every facet half-space and every facet touches a vertex.
    pub fn is_consistent(&self) -> bool {
        self.facet_normals.iter().all(|u| {
            let values: Vec<i64> = self.vertices.iter().map(|v| dot(u, v)).collect();
            values.iter().all(|&x| x <= 1) && values.contains(&1)
        })
    }

    /// Vertex-facet incidences, one bitset per facet.
    fn incidences(&self) -> Vec<Bits> {
        self.facet_normals
            .iter()
            .map(|u| {
                let mut b = Bits::empty(self.vertices.len());
                for (i, v) in self.vertices.iter().enumerate() {
                    if dot(u, v) == 1 {
                        b.set(i);
                    }
                }
                b
            })
            .collect()
    }
}

/// `P_n^a` for `2^n ≤ 16`.
pub fn build_polytope(a: &DensityParam, n: u32) -> Result<VPolytope> {
    if n > 4 {
        return Err(Error::Guard(format!(
            "2^{n} exceeds the oracle dimension cap {MAX_DIM}"
        )));
    }
    let schedule = Schedule::new(a, n as usize)?;
    let mut p = VPolytope::segment();
    for &kind in &schedule.kinds {
        p = match kind {
            StepKind::Product => p.product(&p)?,
            StepKind::Hull => p.free_sum(&p)?,
        };
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn full(n: usize) -> Self {
        let mut b = Self::empty(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Self) -> Self {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.0.iter().enumerate() {
            let mut x = word;
            while x != 0 {
                out.push(w * 64 + x.trailing_zeros() as usize);
                x &= x - 1;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Face {
    /// Sorted vertex indices.
    pub vertices: Vec<usize>,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaceLattice {
    pub dim: usize,
    /// Nonempty faces, improper face last, sorted by dimension then vertex set.
    pub faces: Vec<Face>,
}

/// Rank of integer vectors by fraction-free elimination.
fn rank(mut rows: Vec<Vec<i128>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, pivot);
        for i in r + 1..rows.len() {
            if rows[i][c] != 0 {
                let (a, b) = (rows[r][c], rows[i][c]);
                let pivot_row = rows[r].clone();
                for (x, y) in rows[i][c..].iter_mut().zip(&pivot_row[c..]) {
                    *x = *x * a - y * b;
                }
                let g = rows[i].iter().fold(0i128, |g, &x| num_integer::gcd(g, x));
                if g > 1 {
                    rows[i].iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        r += 1;
    }
    r
}

fn affine_dim(p: &VPolytope, vertices: &[usize]) -> usize {
    let base = &p.vertices[vertices[0]];
    let rows = vertices[1..]
        .iter()
        .map(|&i| {
            p.vertices[i]
                .iter()
                .zip(base)
                .map(|(x, y)| (x - y) as i128)
                .collect()
        })
        .collect();
    rank(rows)
}

/// All nonempty faces, including the polytope itself.
pub fn face_lattice(p: &VPolytope) -> Result<FaceLattice> {
    let expected = 3u64.checked_pow(p.dim as u32).unwrap_or(u64::MAX);
    if expected > FACE_GUARD {
        return Err(Error::Guard(format!(
            "face lattice of a {}-dimensional polytope may hold {expected} faces (cap {FACE_GUARD})",
            p.dim
        )));
    }
    let facets = p.incidences();
    let mut seen: HashSet<Bits> = HashSet::new();
    let mut frontier: Vec<Bits> = Vec::new();
    for f in &facets {
        if seen.insert(f.clone()) {
            frontier.push(f.clone());
        }
    }
    while !frontier.is_empty() {
        let found: Vec<Bits> = frontier
            .par_iter()
            .flat_map_iter(|face| {
                facets
                    .iter()
                    .map(move |f| face.and(f))
                    .filter(|b| !b.is_empty())
            })
            .collect();
        frontier.clear();
        for b in found {
            if seen.len() as u64 >= FACE_GUARD {
                return Err(Error::Guard(format!("more than {FACE_GUARD} faces")));
            }
            if seen.insert(b.clone()) {
                frontier.push(b);
            }
        }
    }
    seen.insert(Bits::full(p.vertices.len()));
    let mut sets: Vec<Bits> = seen.into_iter().collect();
    sets.sort();
    let mut faces: Vec<Face> = sets
        .par_iter()
        .map(|b| {
            let vertices = b.indices();
            let dim = affine_dim(p, &vertices);
            Face { vertices, dim }
        })
        .collect();
    faces.sort_by(|x, y| x.dim.cmp(&y.dim).then_with(|| x.vertices.cmp(&y.vertices)));
    Ok(FaceLattice { dim: p.dim, faces })
}

impl FaceLattice {
    /// `f_0, …, f_{d-1}`.
    pub fn f_vector(&self) -> Vec<u64> {
        let mut f = vec![0; self.dim];
        for face in &self.faces {
            if face.dim < self.dim {
                f[face.dim] += 1;
            }
        }
        f
    }

    /// Nonempty faces including the improper one.
    pub fn face_total(&self) -> u64 {
        self.faces.len() as u64
    }

    pub fn improper_count(&self) -> usize {
        self.faces.iter().filter(|f| f.dim == self.dim).count()
    }

    /// `Σ_{k<d} (-1)^k f_k = 1 - (-1)^d`.
    pub fn euler_holds(&self) -> bool {
        let lhs: i64 = self
            .f_vector()
            .iter()
            .enumerate()
            .map(|(k, &f)| if k % 2 == 0 { f as i64 } else { -(f as i64) })
            .sum();
        lhs == if self.dim.is_multiple_of(2) { 0 } else { 2 }
    }

    /// The vertex map `v ↦ -v` permutes the faces.
    pub fn is_centrally_symmetric(&self, p: &VPolytope) -> bool {
        let index: std::collections::HashMap<&Vec<i64>, usize> =
            p.vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let Some(neg): Option<Vec<usize>> = p
            .vertices
            .iter()
            .map(|v| {
                index
                    .get(&v.iter().map(|c| -c).collect::<Vec<_>>())
                    .copied()
            })
            .collect()
        else {
            return false;
        };
        let faces: HashSet<&Vec<usize>> = self.faces.iter().map(|f| &f.vertices).collect();
        self.faces.iter().all(|f| {
            let mut image: Vec<usize> = f.vertices.iter().map(|&i| neg[i]).collect();
            image.sort_unstable();
            faces.contains(&image)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CrossCheck {
    pub a: String,
    pub n: u32,
    pub dim: usize,
    pub lattice: Vec<u64>,
    pub geometric: Vec<u64>,
    pub paper: Vec<u64>,
    pub face_total: u64,
    pub kalai_ok: bool,
    pub euler_ok: bool,
    pub symmetric_ok: bool,
    pub geometric_match: bool,
    /// Paper coefficients ≥ lattice coefficients.
    pub paper_dominates: bool,
    /// Paper and lattice agree below `2^{first hull step}` (all `k` if no hull).
    pub paper_prefix_equal: bool,
}

impl CrossCheck {
    pub fn passed(&self) -> bool {
        self.kalai_ok
            && self.euler_ok
            && self.symmetric_ok
            && self.geometric_match
            && self.paper_dominates
            && self.paper_prefix_equal
    }
}

fn to_u64s(v: &[BigUint]) -> Vec<u64> {
    v.iter().map(|c| c.to_u64().unwrap_or(u64::MAX)).collect()
}

/// Compares the lattice f-vector with both engines. A geometric mismatch is
/// an error; the remaining checks are reported.
pub fn f_vector_crosscheck(a: &DensityParam, n: u32) -> Result<CrossCheck> {
    let p = build_polytope(a, n)?;
    let lattice = face_lattice(&p)?;
    let d = p.dim;
    let f = lattice.f_vector();
    let geometric = face_numbers(a, n, d, EngineKind::GeometricExact)?;
    let geometric = to_u64s(&geometric.f_vector().unwrap());
    let paper = face_numbers(a, n, d, EngineKind::PaperExact)?;
    let paper = to_u64s(&paper.exact().unwrap().coeffs()[..d]);
    if geometric != f {
        return Err(Error::Verification(format!(
            "lattice f-vector {f:?} differs from the geometric engine {geometric:?} (a={a}, n={n})"
        )));
    }
    let prefix = Schedule::new(a, n as usize)?
        .first_hull()
        .map_or(d, |h| 1usize << h)
        .min(d);
    Ok(CrossCheck {
        a: a.to_string(),
        n,
        dim: d,
        face_total: lattice.face_total(),
        kalai_ok: lattice.face_total() == 3u64.pow(d as u32) && lattice.improper_count() == 1,
        euler_ok: lattice.euler_holds(),
        symmetric_ok: p.is_centrally_symmetric() && lattice.is_centrally_symmetric(&p),
        geometric_match: true,
        paper_dominates: paper.iter().zip(&f).all(|(x, y)| x >= y),
        paper_prefix_equal: paper[..prefix] == f[..prefix],
        lattice: f,
        geometric,
        paper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RadiiState {
    /// Squared circumradius.
    pub r_sq: u64,
    /// Inverse squared inradius.
    pub r_inv_sq: u64,
}

impl RadiiState {
    /// `(R/r)²`.
    pub fn ratio_sq(&self) -> u64 {
        self.r_sq * self.r_inv_sq
    }
}

/// `R² = max ‖v‖²`, `r⁻² = max ‖u‖²` over facet normals at offset 1.
pub fn radii(p: &VPolytope) -> RadiiState {
    RadiiState {
        r_sq: p.vertices.iter().map(|v| norm_sq(v)).max().unwrap_or(0),
        r_inv_sq: p
            .facet_normals
            .iter()
            .map(|u| norm_sq(u))
            .max()
            .unwrap_or(0),
    }
}

/// Products double `R²`, hulls double `r⁻²`.
pub fn radii_recursion(a: &DensityParam, n: u32) -> Result<RadiiState> {
    if n > 62 {
        return Err(Error::Guard(format!(
            "radii recursion limited to n ≤ 62, got {n}"
        )));
    }
    let schedule = Schedule::new(a, n as usize)?;
    let mut s = RadiiState {
        r_sq: 1,
        r_inv_sq: 1,
    };
    for &kind in &schedule.kinds {
        match kind {
            StepKind::Product => s.r_sq *= 2,
            StepKind::Hull => s.r_inv_sq *= 2,
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: u64, q: u64) -> DensityParam {
        DensityParam::rational(p, q).unwrap()
    }

    fn sorted(mut v: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
        v.sort();
        v
    }

    #[test]
    fn build_examples() {
        let s = VPolytope::segment();
        assert_eq!(s.vertices, vec![vec![1], vec![-1]]);
        let square = s.product(&s).unwrap();
        assert_eq!(
            sorted(square.vertices.clone()),
            vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]
        );
        assert_eq!(
            sorted(square.facet_normals.clone()),
            vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]
        );
        let cross = s.free_sum(&s).unwrap();
        assert_eq!(
            sorted(cross.vertices.clone()),
            vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]
        );
        assert_eq!(sorted(cross.facet_normals.clone()).len(), 4);
        assert!(cross
            .facet_normals
            .iter()
            .all(|u| u.iter().all(|c| c.abs() == 1)));
        assert!(matches!(
            build_polytope(&rat(1, 2), 5),
            Err(Error::Guard(_))
        ));
        for a in [rat(1, 2), rat(1, 3), rat(2, 3), rat(2, 5)] {
            for n in 0..=4 {
                let p = build_polytope(&a, n).unwrap();
                assert_eq!(p.dim, 1 << n);
                assert!(p.is_centrally_symmetric());
                assert!(p.is_consistent());
            }
        }
    }

    #[test]
    fn lattice_examples() {
        let s = VPolytope::segment();
        let square = face_lattice(&s.product(&s).unwrap()).unwrap();
        assert_eq!(square.f_vector(), vec![4, 4]);
        assert_eq!(square.face_total(), 9);
        let cross = face_lattice(&s.free_sum(&s).unwrap()).unwrap();
        assert_eq!(cross.f_vector(), vec![4, 4]);
        let p = build_polytope(&rat(1, 2), 2).unwrap();
        let lattice = face_lattice(&p).unwrap();
        assert_eq!(lattice.f_vector(), vec![8, 24, 32, 16]);
        assert!(lattice.euler_holds());
        assert!(lattice.is_centrally_symmetric(&p));
        let big = build_polytope(&rat(1, 2), 4).unwrap();
        assert!(matches!(face_lattice(&big), Err(Error::Guard(_))));
    }

    #[test]
    fn crosscheck_examples() {
        let c = f_vector_crosscheck(&rat(1, 2), 2).unwrap();
        assert_eq!(c.lattice, vec![8, 24, 32, 16]);
        assert_eq!(c.paper, vec![8, 24, 34, 24]);
        assert!(c.passed());
        let c = f_vector_crosscheck(&rat(1, 2), 0).unwrap();
        assert_eq!(
            (c.lattice.clone(), c.geometric.clone(), c.paper.clone()),
            (vec![2], vec![2], vec![2])
        );
        let c = f_vector_crosscheck(&rat(2, 3), 2).unwrap();
        assert_eq!(c.lattice, vec![16, 32, 24, 8]);
        assert_eq!(c.paper, c.lattice);
        for a in [rat(1, 2), rat(1, 3), rat(2, 3), rat(2, 5)] {
            for n in 0..=3 {
                assert!(f_vector_crosscheck(&a, n).unwrap().passed(), "{a} n={n}");
            }
        }
    }

    #[test]
    fn radii_examples() {
        let s = VPolytope::segment();
        assert_eq!(
            radii(&s.product(&s).unwrap()),
            RadiiState {
                r_sq: 2,
                r_inv_sq: 1
            }
        );
        assert_eq!(
            radii(&s.free_sum(&s).unwrap()),
            RadiiState {
                r_sq: 1,
                r_inv_sq: 2
            }
        );
        let r = radii_recursion(&rat(1, 2), 3).unwrap();
        assert_eq!(
            r,
            RadiiState {
                r_sq: 4,
                r_inv_sq: 2
            }
        );
        for a in [rat(1, 2), rat(1, 3), rat(2, 3), rat(2, 5)] {
            for n in 0..=4 {
                let p = build_polytope(&a, n).unwrap();
                assert_eq!(radii(&p), radii_recursion(&a, n).unwrap());
            }
            for n in 0..=16 {
                assert_eq!(radii_recursion(&a, n).unwrap().ratio_sq(), 1 << n);
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(vec![vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(rank(vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 2]]), 2);
        assert_eq!(rank(vec![]), 0);
    }
}
