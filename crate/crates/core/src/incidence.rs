//! Exact solution counts for Moebius-type equations over F_p and F_p[i],
//! compared against the equidistribution main term, plus multiplicity maps of
//! products of matrix sets.

use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, Fp, Fq, FqCtx};
use crate::par;
use crate::sets::{FqSet, PointSet};
use crate::sl2::{Mat2, ProjPoint};

/// Default cap on estimated map insertions for product operations.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// The product-op budget, overridable through `LAB_BUDGET`.
pub fn budget_from_env() -> u128 {
    std::env::var("LAB_BUDGET").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

/// Index tuples `(alpha_0, ..., alpha_k)` with entries in `[1, box_n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SFamily {
    tuples: Vec<Vec<u64>>,
    box_n: u64,
    k: usize,
    max_slice: usize,
}

impl SFamily {
    /// `k` is the tuple length minus one; all tuples must share it.
    pub fn new(box_n: u64, k: usize, tuples: Vec<Vec<u64>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(tuples.len());
        for t in &tuples {
            if t.len() != k + 1 {
                return Err(LabError::Invalid(format!("tuple {t:?} does not have length {}", k + 1)));
            }
            if t.iter().any(|&x| x == 0 || x > box_n) {
                return Err(LabError::Invalid(format!("tuple {t:?} leaves [1, {box_n}]")));
            }
            if !seen.insert(t) {
                return Err(LabError::Invalid(format!("duplicate tuple {t:?}")));
            }
        }
        let max_slice = (0..=k)
            .map(|j| {
                let mut hist: HashMap<u64, usize> = HashMap::new();
                for t in &tuples {
                    *hist.entry(t[j]).or_default() += 1;
                }
                hist.into_values().max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0);
        Ok(SFamily { tuples, box_n, k, max_slice })
    }

    /// Pairs `(alpha, beta)`.
    pub fn from_pairs(box_n: u64, pairs: &[(u64, u64)]) -> Result<Self> {
        Self::new(box_n, 1, pairs.iter().map(|&(a, b)| vec![a, b]).collect())
    }

    /// `(stride·[n])^{k+1}` in lexicographic order.
    pub fn grid(n: u64, k: usize, stride: u64) -> Result<Self> {
        let mut tuples = vec![Vec::new()];
        for _ in 0..=k {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (1..=n).map(move |j| {
                        let mut t2 = t.clone();
                        t2.push(stride * j);
                        t2
                    })
                })
                .collect();
        }
        Self::new(stride * n, k, tuples)
    }

    /// `{(c, c) : c ∈ stride·[n]}`.
    pub fn diagonal(n: u64, stride: u64) -> Result<Self> {
        Self::new(stride * n, 1, (1..=n).map(|j| vec![stride * j, stride * j]).collect())
    }

    pub fn tuples(&self) -> &[Vec<u64>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn box_n(&self) -> u64 {
        self.box_n
    }

    /// Largest intersection with a hyperplane `z_j = const`.
    pub fn max_slice(&self) -> usize {
        self.max_slice
    }

    fn pairs(&self, f: &FieldCtx) -> Result<Vec<(Fp, Fp)>> {
        if self.k != 1 {
            return Err(LabError::Invalid(format!("expected a family of pairs, got k = {}", self.k)));
        }
        Ok(self.tuples.iter().map(|t| (f.from_u64(t[0]), f.from_u64(t[1]))).collect())
    }
}

fn ser_ratio<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&ratio_string(r))
}

fn ser_big<S: Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

/// `num/den`, or just `num` for integers.
pub fn ratio_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// An exact count with its main term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub exact_count: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub main_term: BigRational,
    /// `(count - main) / scale`; 0 when the scale vanishes.
    pub normalized_error: f64,
    /// Largest hyperplane slice of the index family, where one applies.
    pub max_slice: Option<usize>,
}

impl CountReport {
    fn new(count: u64, main: BigRational, scale: f64, max_slice: Option<usize>) -> Self {
        let diff = BigRational::from_integer(BigInt::from(count)) - &main;
        let normalized_error = if scale > 0.0 { ratio_to_f64(&diff) / scale } else { 0.0 };
        CountReport { exact_count: count, main_term: main, normalized_error, max_slice }
    }
}

/// `|S||A||B|/p`, scale `sqrt(|A||B|)·|S|`.
fn bg_report(count: u64, s: usize, a: &PointSet, b: &PointSet, p: u64, max_slice: Option<usize>) -> CountReport {
    let main = BigRational::new(BigInt::from(s) * a.len() * b.len(), BigInt::from(p));
    let scale = ((a.len() * b.len()) as f64).sqrt() * s as f64;
    CountReport::new(count, main, scale, max_slice)
}

/// `img[x] = g(x)` on F_p, `u32::MAX` at the pole.
fn image_table(f: &FieldCtx, g: &Mat2) -> Vec<u32> {
    let mut t = vec![0u32; f.p() as usize];
    par::fill(&mut t, |x| g.mobius_finite(f, f.from_u64(x as u64)).map_or(u32::MAX, |y| y.value() as u32));
    t
}

fn count_pairs(f: &FieldCtx, g: &Mat2, pairs: &[(Fp, Fp)], a: &PointSet, b: &PointSet) -> u64 {
    let img = image_table(f, g);
    let avals = a.values();
    par::sum_range_u64(pairs.len(), |i| {
        let (al, be) = pairs[i];
        avals
            .iter()
            .filter(|&&x| {
                let y = img[f.add(f.from_u64(x), al).value() as usize];
                y != u32::MAX && b.contains(f.sub(Fp::from_reduced(y as u64), be))
            })
            .count() as u64
    })
}

/// `#{(c, a, b) ∈ (stride·[N]) × A × B : g(c + a) = c + b}`.
pub fn count_bg_prime(f: &FieldCtx, g: &Mat2, n: u64, stride: u64, a: &PointSet, b: &PointSet) -> Result<CountReport> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    if stride == 0 || stride * n >= f.p() {
        return Err(LabError::Invalid(format!("need stride·N < p (stride {stride}, N {n}, p {})", f.p())));
    }
    let pairs: Vec<(Fp, Fp)> = (1..=n).map(|j| (f.from_u64(stride * j), f.from_u64(stride * j))).collect();
    let count = count_pairs(f, g, &pairs, a, b);
    Ok(bg_report(count, n as usize, a, b, f.p(), None))
}

/// `#{(α, β) ∈ S, a ∈ A, b ∈ B : g(α + a) = β + b}`.
pub fn count_bg_general(f: &FieldCtx, g: &Mat2, s: &SFamily, a: &PointSet, b: &PointSet) -> Result<CountReport> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    let pairs = s.pairs(f)?;
    let count = count_pairs(f, g, &pairs, a, b);
    Ok(bg_report(count, s.len(), a, b, f.p(), Some(s.max_slice())))
}

/// `#{(α_0..α_k) ∈ S, a ∈ A, b ∈ B : u_{α_k} g_k u_{α_{k-1}} ... g_1 u_{α_0} a = b}`.
///
/// For `k = 1` the tuple `(α, -β)` reproduces `count_bg_general` at `(α, β)`.
pub fn count_bg_words(f: &FieldCtx, gs: &[Mat2], s: &SFamily, a: &PointSet, b: &PointSet) -> Result<CountReport> {
    if gs.iter().any(Mat2::is_borel) {
        return Err(LabError::BorelElement);
    }
    if !s.is_empty() && gs.len() != s.k() {
        return Err(LabError::Invalid(format!("{} maps for a family with k = {}", gs.len(), s.k())));
    }
    let p = f.p();
    // tables over P^1, infinity at index p
    let tables: Vec<Vec<u32>> = gs
        .iter()
        .map(|g| (0..=p as usize).map(|i| g.mobius(f, ProjPoint::from_index(f, i)).index(p) as u32).collect())
        .collect();
    let avals = a.values();
    let inf = p as u32;
    let count = par::sum_range_u64(s.len(), |i| {
        let t = &s.tuples()[i];
        avals
            .iter()
            .filter(|&&x0| {
                let shift = |x: u32, al: u64| if x == inf { inf } else { ((x as u64 + al) % p) as u32 };
                let mut x = shift(x0 as u32, t[0]);
                for (tab, &al) in tables.iter().zip(&t[1..]) {
                    x = shift(tab[x as usize], al);
                }
                x != inf && b.contains(Fp::from_reduced(x as u64))
            })
            .count() as u64
    });
    Ok(bg_report(count, s.len(), a, b, p, Some(s.max_slice())))
}

/// A block of a union-structured family: `S_j + (dx, dy)`.
#[derive(Clone, Debug)]
pub struct UnionBlock {
    pub shift: (i64, i64),
    pub family: SFamily,
}

/// All pairs of the union, reduced mod p, after checking disjointness.
pub fn flatten_union(f: &FieldCtx, blocks: &[UnionBlock], omega: &[(i64, i64)]) -> Result<Vec<(Fp, Fp)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for blk in blocks {
        for (al, be) in blk.family.pairs(f)? {
            let pair = (f.add(al, f.elem(blk.shift.0)), f.add(be, f.elem(blk.shift.1)));
            if !seen.insert(pair) {
                return Err(LabError::OverlappingBlocks);
            }
            out.push(pair);
        }
    }
    for &(al, be) in omega {
        let pair = (f.elem(al), f.elem(be));
        if !seen.insert(pair) {
            return Err(LabError::OverlappingBlocks);
        }
        out.push(pair);
    }
    Ok(out)
}

/// Sum of per-block counts plus the count over `Ω`.
pub fn count_union_structured(
    f: &FieldCtx,
    g: &Mat2,
    blocks: &[UnionBlock],
    omega: &[(i64, i64)],
    a: &PointSet,
    b: &PointSet,
) -> Result<CountReport> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    let all = flatten_union(f, blocks, omega)?;
    let mut count = 0;
    for blk in blocks {
        let pairs: Vec<(Fp, Fp)> = blk
            .family
            .pairs(f)?
            .into_iter()
            .map(|(al, be)| (f.add(al, f.elem(blk.shift.0)), f.add(be, f.elem(blk.shift.1))))
            .collect();
        count += count_pairs(f, g, &pairs, a, b);
    }
    let om: Vec<(Fp, Fp)> = omega.iter().map(|&(x, y)| (f.elem(x), f.elem(y))).collect();
    count += count_pairs(f, g, &om, a, b);
    Ok(bg_report(count, all.len(), a, b, f.p(), None))
}

/// `H = {u_{-β} g u_α : (α, β) ∈ S}` in family order, duplicates dropped.
pub fn build_h_set(f: &FieldCtx, g: &Mat2, s: &SFamily) -> Result<Vec<Mat2>> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    let mut out = Vec::with_capacity(s.len());
    let mut seen = HashSet::new();
    for (al, be) in s.pairs(f)? {
        let h = Mat2::u(f, f.neg(be)).mul(f, g).mul(f, &Mat2::u(f, al));
        if seen.insert(h) {
            out.push(h);
        }
    }
    Ok(out)
}

fn check_budget(h: usize, l: u32, budget: u128) -> Result<u128> {
    let estimate = (h as u128).checked_pow(2 * l).unwrap_or(u128::MAX);
    if estimate > budget {
        return Err(LabError::BudgetExceeded { estimate, budget });
    }
    Ok(estimate)
}

/// `r(x)` = number of ways to write `x = h_1 h_2^{-1} ... h_{2l-1} h_{2l}^{-1}`.
pub fn multiplicity_map(f: &FieldCtx, h: &[Mat2], l: u32, budget: u128) -> Result<HashMap<Mat2, u64>> {
    check_budget(h.len(), l, budget)?;
    let hinv: Vec<Mat2> = h.iter().map(|x| x.inv(f)).collect();
    let mut map: HashMap<Mat2, u64> = HashMap::from([(Mat2::identity(f), 1)]);
    for _ in 0..l {
        map = convolve(f, &map, h);
        map = convolve(f, &map, &hinv);
    }
    Ok(map)
}

fn convolve(f: &FieldCtx, map: &HashMap<Mat2, u64>, right: &[Mat2]) -> HashMap<Mat2, u64> {
    let mut entries: Vec<(Mat2, u64)> = map.iter().map(|(k, v)| (*k, *v)).collect();
    entries.sort_unstable();
    let chunk = entries.len().div_ceil(64).max(1);
    let pieces: Vec<&[(Mat2, u64)]> = entries.chunks(chunk).collect();
    let parts = par::map_slice(&pieces, |part| {
        let mut local: HashMap<Mat2, u64> = HashMap::new();
        for (x, c) in part.iter() {
            for y in right {
                *local.entry(x.mul(f, y)).or_default() += c;
            }
        }
        local
    });
    let mut out: HashMap<Mat2, u64> = HashMap::new();
    for part in parts {
        for (k, v) in part {
            *out.entry(k).or_default() += v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductStats {
    /// `max_x r(x)`
    pub linf: u64,
    /// `Σ_x r(x)^2`
    #[serde(serialize_with = "ser_big")]
    pub l2: BigUint,
    pub support: usize,
}

/// Exact `‖r‖_∞` and `Σ r²` for `(H H^{-1})^l`.
pub fn product_multiplicity(f: &FieldCtx, h: &[Mat2], l: u32, budget: u128) -> Result<ProductStats> {
    let map = multiplicity_map(f, h, l, budget)?;
    let linf = map.values().copied().max().unwrap_or(0);
    let l2 = map.values().fold(BigUint::zero(), |acc, &v| acc + BigUint::from(v) * v);
    Ok(ProductStats { linf, l2, support: map.len() })
}

/// Which coset the mass is measured on.
#[derive(Clone, Debug, PartialEq)]
pub enum SubgroupSpec {
    /// The whole group, a sanity reference.
    Whole,
    /// `g1 B g2`.
    Borel { g1: Mat2, g2: Mat2 },
    /// `z C_eps`.
    Dihedral { eps: Fp, z: Mat2 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassReport {
    #[serde(serialize_with = "ser_big")]
    pub mass: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub total: BigUint,
    /// `total / mass`; infinite when the mass is zero.
    pub k: f64,
}

pub fn subgroup_mass(f: &FieldCtx, h: &[Mat2], l: u32, spec: &SubgroupSpec, budget: u128) -> Result<MassReport> {
    if let SubgroupSpec::Dihedral { eps, .. } = spec {
        if f.legendre(*eps) != -1 {
            return Err(LabError::BadEps(eps.value()));
        }
    }
    let map = multiplicity_map(f, h, l, budget)?;
    let inside = |x: &Mat2| -> bool {
        match spec {
            SubgroupSpec::Whole => true,
            SubgroupSpec::Borel { g1, g2 } => g1.inv(f).mul(f, x).mul(f, &g2.inv(f)).is_borel(),
            SubgroupSpec::Dihedral { eps, z } => z.inv(f).mul(f, x).in_dihedral(f, *eps).expect("eps checked"),
        }
    };
    let mass: u64 = map.iter().filter(|(x, _)| inside(x)).map(|(_, v)| *v).sum();
    let total = BigUint::from(h.len()).pow(2 * l);
    let k = if mass == 0 { f64::INFINITY } else { total.to_f64().unwrap_or(f64::NAN) / mass as f64 };
    Ok(MassReport { mass: BigUint::from(mass), total, k })
}

/// `r(v) = #{(a, b, c) : a + b ≠ 0, 1/(a+b) + c = v}`.
fn cont2_hist(f: &FieldCtx, a: &PointSet, b: &PointSet, c: &PointSet) -> Vec<u64> {
    let p = f.p() as usize;
    let avals = a.values();
    let (bv, cv) = (b.values(), c.values());
    let chunks = avals.len().clamp(1, 16);
    let per = avals.len().div_ceil(chunks).max(1);
    let parts = par::map_range(chunks, |ci| {
        let mut hist = vec![0u64; p];
        for &x in avals.iter().skip(ci * per).take(per) {
            for &y in &bv {
                let s = f.from_u64(x + y);
                if s.is_zero() {
                    continue;
                }
                let inv = f.inv(s).expect("nonzero");
                for &z in &cv {
                    hist[f.add(inv, Fp::from_reduced(z)).value() as usize] += 1;
                }
            }
        }
        hist
    });
    let mut hist = vec![0u64; p];
    for part in parts {
        hist.iter_mut().zip(part).for_each(|(h, v)| *h += v);
    }
    hist
}

/// Solutions of `1/(a+b) + c = 1/(a'+b') + c'`.
pub fn count_cont2_energy(f: &FieldCtx, a: &PointSet, b: &PointSet, c: &PointSet) -> BigUint {
    cont2_hist(f, a, b, c).into_iter().fold(BigUint::zero(), |acc, v| acc + BigUint::from(v) * v)
}

/// `|{1/(a+b) + c : a, b, c ∈ A, a + b ≠ 0}|`.
pub fn image_size_cont2(f: &FieldCtx, a: &PointSet) -> usize {
    cont2_hist(f, a, a, a).into_iter().filter(|&v| v > 0).count()
}

/// `E+(C) = #{c1 + c2 = c3 + c4}`.
pub fn additive_energy(f: &FieldCtx, c: &PointSet) -> BigUint {
    let mut hist = vec![0u64; f.p() as usize];
    let cv = c.values();
    for &x in &cv {
        for &y in &cv {
            hist[((x + y) % f.p()) as usize] += 1;
        }
    }
    hist.into_iter().fold(BigUint::zero(), |acc, v| acc + BigUint::from(v) * v)
}

/// `|A|^{7/5} |B|^{8/5} |C|^{6/5} E+(C)^{1/5}`.
pub fn cont2_bound_shape(a: usize, b: usize, c: usize, energy_c: &BigUint) -> f64 {
    let e = energy_c.to_f64().unwrap_or(f64::NAN);
    (a as f64).powf(1.4) * (b as f64).powf(1.6) * (c as f64).powf(1.2) * e.powf(0.2)
}

/// `I(A × B, T) = #{(a, b, t) : t(a) = b}`.
pub fn count_mobius_incidences(f: &FieldCtx, a: &PointSet, b: &PointSet, t: &[Mat2]) -> u64 {
    let avals = a.values();
    par::sum_range_u64(t.len(), |i| {
        avals.iter().filter(|&&x| t[i].mobius_finite(f, Fp::from_reduced(x)).is_some_and(|y| b.contains(y))).count()
            as u64
    })
}

/// `|A|^{4/5}|B|^{3/5}|T|^{4/5} + |A|^{6/5}|B|^{7/5}|T|^{1/5} + |T|`.
pub fn incidence_bound_shape(a: usize, b: usize, t: usize) -> f64 {
    let (a, b, t) = (a as f64, b as f64, t as f64);
    a.powf(0.8) * b.powf(0.6) * t.powf(0.8) + a.powf(1.2) * b.powf(1.4) * t.powf(0.2) + t
}

/// `#{(a, b, c, d) : (a + b)(c + d) = λ}` over F_p[i]; main term
/// `|A||B||C||D|/p^2`, scale `sqrt(|A||C|)·|B||D|`.
pub fn count_fq_system(fq: &FqCtx, a: &FqSet, b: &FqSet, c: &FqSet, d: &FqSet, lambda: Fq) -> Result<CountReport> {
    if fq.is_zero(lambda) {
        return Err(LabError::ZeroLambda);
    }
    let q = fq.order() as usize;
    let sum_hist = |x: &FqSet, y: &FqSet| {
        let mut h = vec![0u64; q];
        let yv: Vec<Fq> = y.indices().map(|i| fq.from_index(i)).collect();
        for i in x.indices() {
            let u = fq.from_index(i);
            for &v in &yv {
                h[fq.index(fq.add(u, v))] += 1;
            }
        }
        h
    };
    let hab = sum_hist(a, b);
    let hcd = sum_hist(c, d);
    let count = par::sum_range_u64(q, |i| {
        if i == 0 || hab[i] == 0 {
            return 0;
        }
        let s = fq.from_index(i);
        let t = fq.mul(lambda, fq.inv(s).expect("nonzero"));
        hab[i] * hcd[fq.index(t)]
    });
    let p = fq.base().p();
    let main = BigRational::new(BigInt::from(a.len()) * b.len() * c.len() * d.len(), BigInt::from(p * p));
    let scale = ((a.len() * c.len()) as f64).sqrt() * (b.len() * d.len()) as f64;
    Ok(CountReport::new(count, main, scale, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: u64) -> FieldCtx {
        FieldCtx::new(p).unwrap()
    }

    fn set(p: u64, v: &[u64]) -> PointSet {
        PointSet::from_values(p, v.iter().copied())
    }

    /// Naive loop over `(α, β, a, b)` using the projective action directly.
    fn oracle_general(f: &FieldCtx, g: &Mat2, pairs: &[(i64, i64)], a: &PointSet, b: &PointSet) -> u64 {
        let mut n = 0;
        for &(al, be) in pairs {
            for x in a.iter() {
                for y in b.iter() {
                    let lhs = g.mobius(f, ProjPoint::Finite(f.add(x, f.elem(al))));
                    if lhs == ProjPoint::Finite(f.add(y, f.elem(be))) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn bg_prime_examples() {
        let f13 = f(13);
        let w = Mat2::w(&f13);
        let full = PointSet::full(13);
        let r = count_bg_prime(&f13, &w, 5, 1, &full, &full).unwrap();
        assert_eq!(r.exact_count, 5 * 12);
        assert_eq!(count_bg_prime(&f13, &w, 5, 1, &PointSet::empty(13), &full).unwrap().exact_count, 0);
        let (a, b) = (set(13, &[1, 2]), set(13, &[3]));
        let r = count_bg_prime(&f13, &w, 2, 2, &a, &b).unwrap();
        assert_eq!(r.exact_count, oracle_general(&f13, &w, &[(2, 2), (4, 4)], &a, &b));
        assert_eq!(ratio_string(&r.main_term), "4/13");
        assert_eq!(count_bg_prime(&f13, &Mat2::u(&f13, f13.one()), 2, 1, &a, &b), Err(LabError::BorelElement));
    }

    #[test]
    fn bg_general_examples() {
        let f17 = f(17);
        let w = Mat2::w(&f17);
        let r = PointSet::residues(&f17);
        let s = SFamily::grid(3, 1, 1).unwrap();
        let pairs: Vec<(i64, i64)> = s.tuples().iter().map(|t| (t[0] as i64, t[1] as i64)).collect();
        assert_eq!(
            count_bg_general(&f17, &w, &s, &r, &r).unwrap().exact_count,
            oracle_general(&f17, &w, &pairs, &r, &r)
        );
        let full = PointSet::full(17);
        assert_eq!(count_bg_general(&f17, &w, &s, &full, &full).unwrap().exact_count, 9 * 16);
        let diag = SFamily::diagonal(4, 1).unwrap();
        assert_eq!(
            count_bg_general(&f17, &w, &diag, &r, &r).unwrap().exact_count,
            count_bg_prime(&f17, &w, 4, 1, &r, &r).unwrap().exact_count
        );
        assert_eq!(s.max_slice(), 3);
    }

    #[test]
    fn words_examples() {
        let f19 = f(19);
        let w = Mat2::w(&f19);
        let s = SFamily::new(2, 2, vec![vec![1, 1, 1], vec![1, 2, 2], vec![2, 1, 2]]).unwrap();
        let a = set(19, &[1, 4, 9]);
        let got = count_bg_words(&f19, &[w, w], &s, &a, &a).unwrap();
        // oracle: compose u_{α2} w u_{α1} w u_{α0} as a matrix and act
        let mut want = 0;
        for t in s.tuples() {
            let m = Mat2::u(&f19, f19.from_u64(t[2]))
                .mul(&f19, &w)
                .mul(&f19, &Mat2::u(&f19, f19.from_u64(t[1])))
                .mul(&f19, &w)
                .mul(&f19, &Mat2::u(&f19, f19.from_u64(t[0])));
            for x in a.iter() {
                if let ProjPoint::Finite(y) = m.mobius(&f19, ProjPoint::Finite(x)) {
                    want += a.contains(y) as u64;
                }
            }
        }
        assert_eq!(got.exact_count, want);
        let empty = SFamily::new(2, 2, vec![]).unwrap();
        assert_eq!(count_bg_words(&f19, &[w, w], &empty, &a, &a).unwrap().exact_count, 0);

        // k = 1 with (α, -β) matches the general count at (α, β)
        let r = PointSet::residues(&f19);
        let g = Mat2::from_ints(&f19, [2, 3, 5, 1]).unwrap();
        let pairs = [(1u64, 2u64), (3, 1), (2, 2)];
        let gen = SFamily::from_pairs(3, &pairs).unwrap();
        let neg: Vec<(u64, u64)> = pairs.iter().map(|&(x, y)| (x, 19 - y)).collect();
        let wf = SFamily::from_pairs(19, &neg).unwrap();
        assert_eq!(
            count_bg_words(&f19, &[g], &wf, &r, &r).unwrap().exact_count,
            count_bg_general(&f19, &g, &gen, &r, &r).unwrap().exact_count
        );
    }

    #[test]
    fn union_examples() {
        let f23 = f(23);
        let w = Mat2::w(&f23);
        let r = PointSet::residues(&f23);
        let blk = |dx, dy| UnionBlock { shift: (dx, dy), family: SFamily::grid(2, 1, 1).unwrap() };
        let blocks = vec![blk(0, 0), blk(5, 7)];
        let omega = vec![(11, 3)];
        let got = count_union_structured(&f23, &w, &blocks, &omega, &r, &r).unwrap();
        let flat: Vec<(i64, i64)> = flatten_union(&f23, &blocks, &omega)
            .unwrap()
            .iter()
            .map(|&(x, y)| (x.value() as i64, y.value() as i64))
            .collect();
        assert_eq!(flat.len(), 9);
        assert_eq!(got.exact_count, oracle_general(&f23, &w, &flat, &r, &r));
        let single = count_union_structured(&f23, &w, &[blk(0, 0)], &[], &r, &r).unwrap();
        assert_eq!(
            single.exact_count,
            count_bg_general(&f23, &w, &SFamily::grid(2, 1, 1).unwrap(), &r, &r).unwrap().exact_count
        );
        let only = count_union_structured(&f23, &w, &[], &omega, &r, &r).unwrap();
        assert_eq!(only.exact_count, oracle_general(&f23, &w, &omega, &r, &r));
        assert_eq!(
            count_union_structured(&f23, &w, &[blk(0, 0), blk(1, 1)], &[], &r, &r),
            Err(LabError::OverlappingBlocks)
        );
    }

    #[test]
    fn h_set_examples() {
        let f101 = f(101);
        let w = Mat2::w(&f101);
        let zero = SFamily { tuples: vec![vec![0, 0]], box_n: 1, k: 1, max_slice: 1 };
        assert_eq!(build_h_set(&f101, &w, &zero).unwrap(), vec![w]);
        let one = SFamily::from_pairs(9, &[(4, 7)]).unwrap();
        // (-β, -αβ - 1 | 1, α)
        assert_eq!(build_h_set(&f101, &w, &one).unwrap(), vec![Mat2::from_ints(&f101, [-7, -29, 1, 4]).unwrap()]);
        assert_eq!(build_h_set(&f101, &w, &SFamily::grid(3, 1, 1).unwrap()).unwrap().len(), 9);
    }

    /// Brute force over all 2l-tuples.
    fn multiplicity_oracle(f: &FieldCtx, h: &[Mat2], l: u32) -> HashMap<Mat2, u64> {
        let mut out = HashMap::new();
        let n = h.len();
        let total = n.pow(2 * l);
        for mut code in 0..total {
            let mut m = Mat2::identity(f);
            for i in 0..2 * l as usize {
                let x = h[code % n];
                code /= n;
                m = m.mul(f, &if i % 2 == 0 { x } else { x.inv(f) });
            }
            *out.entry(m).or_default() += 1;
        }
        out
    }

    #[test]
    fn product_examples() {
        let f101 = f(101);
        let w = Mat2::w(&f101);
        let st = product_multiplicity(&f101, &[w], 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(st.linf, 1);
        let h = build_h_set(&f101, &w, &SFamily::grid(3, 1, 1).unwrap()).unwrap();
        let map1 = multiplicity_map(&f101, &h, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(map1[&Mat2::identity(&f101)], 9);
        let map2 = multiplicity_map(&f101, &h, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(map2, multiplicity_oracle(&f101, &h, 2));
        let st = product_multiplicity(&f101, &h, 2, DEFAULT_BUDGET).unwrap();
        let l2: u64 = map2.values().map(|v| v * v).sum();
        assert_eq!(st.l2, BigUint::from(l2));
        assert_eq!(
            product_multiplicity(&f101, &h, 2, 100).unwrap_err(),
            LabError::BudgetExceeded { estimate: 6561, budget: 100 }
        );
    }

    #[test]
    fn mass_examples() {
        let f101 = f(101);
        let w = Mat2::w(&f101);
        let id = Mat2::identity(&f101);
        for n in 1..=4u64 {
            let h = build_h_set(&f101, &w, &SFamily::grid(n, 1, 1).unwrap()).unwrap();
            let r = subgroup_mass(&f101, &h, 1, &SubgroupSpec::Borel { g1: id, g2: id }, DEFAULT_BUDGET).unwrap();
            assert_eq!(r.mass, BigUint::from(n.pow(3)));
            let whole = subgroup_mass(&f101, &h, 1, &SubgroupSpec::Whole, DEFAULT_BUDGET).unwrap();
            assert_eq!(whole.mass, whole.total);
            assert_eq!(whole.k, 1.0);
        }
        let h = build_h_set(&f101, &w, &SFamily::grid(3, 1, 1).unwrap()).unwrap();
        let eps = f101.smallest_non_residue();
        let d = subgroup_mass(&f101, &h, 1, &SubgroupSpec::Dihedral { eps, z: id }, DEFAULT_BUDGET).unwrap();
        let oracle = multiplicity_oracle(&f101, &h, 1);
        let want: u64 = oracle.iter().filter(|(x, _)| x.in_dihedral(&f101, eps).unwrap()).map(|(_, v)| v).sum();
        assert_eq!(d.mass, BigUint::from(want));
    }

    #[test]
    fn cont2_examples() {
        let f5 = f(5);
        let one = set(5, &[1]);
        assert_eq!(count_cont2_energy(&f5, &one, &one, &one), BigUint::from(1u32));
        assert_eq!(image_size_cont2(&f5, &one), 1);
        let f101 = f(101);
        let a = PointSet::from_elems(101, PointSet::residues(&f101).iter().filter(|x| x.value() <= 20));
        let b = set(101, &[1, 2, 3]);
        let c = set(101, &[5, 50]);
        // 6-tuple oracle on a smaller instance
        let small = set(101, &[1, 4, 5, 9]);
        let mut n = 0u64;
        let val = |x: Fp, y: Fp, z: Fp| f101.inv(f101.add(x, y)).ok().map(|v| f101.add(v, z));
        for a1 in small.iter() {
            for a2 in small.iter() {
                for b1 in b.iter() {
                    for b2 in b.iter() {
                        for c1 in c.iter() {
                            for c2 in c.iter() {
                                let (u, v) = (val(a1, b1, c1), val(a2, b2, c2));
                                n += (u.is_some() && u == v) as u64;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(count_cont2_energy(&f101, &small, &b, &c), BigUint::from(n));
        assert!(image_size_cont2(&f101, &a) > 0);
    }

    #[test]
    fn mobius_incidence_examples() {
        let f31 = f(31);
        let full = PointSet::full(31);
        assert_eq!(count_mobius_incidences(&f31, &full, &full, &[Mat2::w(&f31)]), 30);
        assert_eq!(count_mobius_incidences(&f31, &full, &full, &[]), 0);
    }

    #[test]
    fn fq_examples() {
        let fq = FqCtx::new(f(7)).unwrap();
        let q = 49;
        let full = FqSet::full(q);
        let lam = fq.elem(1, 1);
        let r = count_fq_system(&fq, &full, &full, &full, &full, lam).unwrap();
        assert_eq!(r.exact_count, 49 * 49 * 49 - 49 * 49);
        let empty = FqSet::from_indices(q, []);
        assert_eq!(count_fq_system(&fq, &empty, &full, &full, &full, lam).unwrap().exact_count, 0);
        assert_eq!(count_fq_system(&fq, &full, &full, &full, &full, fq.elem(0, 0)), Err(LabError::ZeroLambda));
        let sets: Vec<FqSet> = (0..4).map(|s| FqSet::random(q, 10, s).unwrap()).collect();
        let mut want = 0;
        for a in sets[0].indices() {
            for b in sets[1].indices() {
                for c in sets[2].indices() {
                    for d in sets[3].indices() {
                        let l = fq.add(fq.from_index(a), fq.from_index(b));
                        let r = fq.add(fq.from_index(c), fq.from_index(d));
                        want += (fq.mul(l, r) == lam) as u64;
                    }
                }
            }
        }
        assert_eq!(count_fq_system(&fq, &sets[0], &sets[1], &sets[2], &sets[3], lam).unwrap().exact_count, want);
    }

    #[test]
    fn family_validation() {
        assert!(SFamily::new(3, 1, vec![vec![1, 4]]).is_err());
        assert!(SFamily::new(3, 1, vec![vec![1, 2], vec![1, 2]]).is_err());
        assert!(SFamily::new(3, 1, vec![vec![1, 2, 3]]).is_err());
        let s = SFamily::grid(2, 2, 2).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.box_n(), 4);
        assert_eq!(s.max_slice(), 4);
    }
}
