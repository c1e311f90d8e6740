//! Cayley graphs stored as generator permutations, girth by BFS, and the
//! second eigenvalue of the normalized adjacency operator.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::FieldCtx;
use crate::par;
use crate::sl2::{Mat2, Sl2Group};

/// `{u_{-2j} g u_{2j} : 1 <= j <= N}`.
pub fn build_generator_set_bg(f: &FieldCtx, g: &Mat2, n: u64) -> Result<Vec<Mat2>> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    let mut out: Vec<Mat2> = Vec::with_capacity(n as usize);
    for j in 1..=n as i64 {
        let h = Mat2::u(f, f.elem(-2 * j)).mul(f, g).mul(f, &Mat2::u(f, f.elem(2 * j)));
        if out.contains(&h) {
            return Err(LabError::DuplicateGenerators);
        }
        out.push(h);
    }
    Ok(out)
}

/// `S ∪ S^{-1}` in first-seen order.
pub fn symmetrize(f: &FieldCtx, gens: &[Mat2]) -> Vec<Mat2> {
    let mut out: Vec<Mat2> = Vec::with_capacity(2 * gens.len());
    for g in gens {
        for h in [*g, g.inv(f)] {
            if !out.contains(&h) {
                out.push(h);
            }
        }
    }
    out
}

/// A Cayley graph: vertex `x` is joined to `x s` for each generator `s`,
/// held as one index permutation per generator.
#[derive(Clone, Debug)]
pub struct CayleyGraph {
    n: usize,
    perms: Vec<Vec<u32>>,
    /// `inverse[i]` is the generator index of `s_i^{-1}` when present.
    inverse: Vec<Option<usize>>,
    identity_generator: bool,
}

impl CayleyGraph {
    /// Graph on `0..n` with the given right-multiplication permutations.
    pub fn from_perms(n: usize, perms: Vec<Vec<u32>>) -> Result<Self> {
        if perms.iter().any(|p| p.len() != n) {
            return Err(LabError::Invalid("permutation length differs from vertex count".into()));
        }
        // x s = x forces s = 1
        let identity_generator = perms.iter().any(|p| p.first() == Some(&0));
        let inverse = (0..perms.len())
            .map(|i| {
                (0..perms.len()).find(|&j| perms[j][perms[i][0] as usize] == 0 && is_inverse(&perms[i], &perms[j]))
            })
            .collect();
        Ok(CayleyGraph { n, perms, inverse, identity_generator })
    }

    /// `Cay(Z_n, gens)`.
    pub fn cyclic(n: usize, gens: &[i64]) -> Result<Self> {
        let perms =
            gens.iter().map(|&s| (0..n).map(|x| (x as i64 + s).rem_euclid(n as i64) as u32).collect()).collect();
        Self::from_perms(n, perms)
    }

    /// `Cay(SL_2(F_p), gens)`; generators must have determinant 1.
    pub fn sl2(group: &Sl2Group, gens: &[Mat2]) -> Result<Self> {
        if gens.iter().any(|g| g.det().value() != 1) {
            return Err(LabError::Invalid("generator is not in SL_2".into()));
        }
        let f = group.field();
        let n = group.order();
        let elems: Vec<Mat2> = par::map_range(n, |i| group.element(i));
        let perms = gens
            .iter()
            .map(|s| {
                let mut p = vec![0u32; n];
                par::fill(&mut p, |x| group.index(&elems[x].mul(f, s)) as u32);
                p
            })
            .collect();
        Self::from_perms(n, perms)
    }

    pub fn vertices(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.perms.len()
    }

    /// `S = S^{-1}`.
    pub fn is_symmetric(&self) -> bool {
        self.inverse.iter().all(Option::is_some)
    }

    fn check_identity(&self) -> Result<()> {
        if self.identity_generator {
            return Err(LabError::IdentityGenerator);
        }
        Ok(())
    }

    /// Number of vertices reachable from vertex 0 along generator edges.
    pub fn reach(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for p in &self.perms {
                let v = p[u] as usize;
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    pub fn check_connected(&self) -> Result<()> {
        let reached = self.reach();
        if reached != self.n {
            return Err(LabError::NotConnected { reached, total: self.n });
        }
        Ok(())
    }

    /// Shortest cycle length. For symmetric `S` this is the girth of the
    /// simple undirected graph; otherwise the shortest relation
    /// `s_1 ... s_k = 1`. `None` when there is no cycle.
    pub fn girth(&self) -> Result<Option<usize>> {
        self.check_identity()?;
        let mut dist = vec![u32::MAX; self.n];
        let mut parent = vec![u32::MAX; self.n];
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let symmetric = self.is_symmetric();
        let mut best: Option<usize> = None;
        while let Some(u) = queue.pop_front() {
            let du = dist[u] as usize;
            if let Some(b) = best {
                // every later cycle found is at least 2*du + 1 long
                if 2 * du + 1 >= b {
                    break;
                }
            }
            for p in &self.perms {
                let v = p[u] as usize;
                if dist[v] == u32::MAX {
                    dist[v] = du as u32 + 1;
                    parent[v] = u as u32;
                    queue.push_back(v);
                } else if symmetric {
                    if parent[u] as usize == v || parent[v] as usize == u || v == u {
                        continue;
                    }
                    let len = du + dist[v] as usize + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                } else if v == 0 {
                    let len = du + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
        Ok(best)
    }

    /// `(M f)(x) = (1/|S|) Σ_s f(x s)`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let k = 1.0 / self.perms.len() as f64;
        par::fill(out, |i| self.perms.iter().map(|p| x[p[i] as usize]).sum::<f64>() * k);
    }

    /// `(M^T f)(x) = (1/|S|) Σ_s f(x s^{-1})`.
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let k = 1.0 / self.perms.len() as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in &self.perms {
            for (i, &j) in p.iter().enumerate() {
                out[j as usize] += x[i] * k;
            }
        }
    }
}

fn is_inverse(p: &[u32], q: &[u32]) -> bool {
    p.iter().enumerate().all(|(i, &j)| q[j as usize] as usize == i)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpectralMethod {
    Lanczos,
    Power,
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub tol: f64,
    pub seed: u64,
    pub method: SpectralMethod,
    /// Lanczos basis size cap or power-iteration step cap.
    pub max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol: 1e-8, seed: 0, method: SpectralMethod::Lanczos, max_iter: 100_000 }
    }
}

/// Extreme spectrum of the normalized adjacency on the complement of the
/// constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    /// `|λ|` for the largest eigenvalue λ on the complement of constants.
    pub lambda2: f64,
    pub lambda2_signed: f64,
    /// Smallest eigenvalue (NaN when the method does not compute it).
    pub lambda_min: f64,
    /// `max(|λ2|, |λ_min|)`.
    pub two_sided: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub method: SpectralMethod,
}

/// Second eigenvalue of a symmetric generator set's normalized adjacency.
pub fn second_eigenvalue(graph: &CayleyGraph, opts: &SpectralOptions) -> Result<SpectralReport> {
    if !graph.is_symmetric() {
        return Err(LabError::Invalid(
            "generator set is not symmetric; symmetrize or use the singular-value path".into(),
        ));
    }
    graph.check_connected()?;
    let n = graph.vertices();
    let op = |x: &[f64], y: &mut [f64]| graph.apply(x, y);
    match opts.method {
        SpectralMethod::Lanczos => {
            let r = lanczos_extremes(&op, n, opts)?;
            Ok(SpectralReport {
                lambda2: r.max.abs(),
                lambda2_signed: r.max,
                lambda_min: r.min,
                two_sided: r.max.abs().max(r.min.abs()),
                iterations: r.steps,
                residual: r.residual,
                converged: r.residual < opts.tol,
                method: SpectralMethod::Lanczos,
            })
        }
        SpectralMethod::Power => {
            let r = power_shifted(&op, n, opts);
            Ok(SpectralReport {
                lambda2: r.0.abs(),
                lambda2_signed: r.0,
                lambda_min: f64::NAN,
                two_sided: f64::NAN,
                iterations: r.1,
                residual: r.2,
                converged: r.2 < opts.tol,
                method: SpectralMethod::Power,
            })
        }
    }
}

/// Second singular value of `M` for an arbitrary generator set, from the
/// top eigenvalue of `M^T M` on the complement of constants.
pub fn second_singular_value(graph: &CayleyGraph, opts: &SpectralOptions) -> Result<SpectralReport> {
    graph.check_connected()?;
    let n = graph.vertices();
    let op = |x: &[f64], y: &mut [f64]| {
        let mut tmp = vec![0.0; x.len()];
        graph.apply(x, &mut tmp);
        graph.apply_transpose(&tmp, y);
    };
    let r = lanczos_extremes(&op, n, opts)?;
    let s = r.max.max(0.0).sqrt();
    Ok(SpectralReport {
        lambda2: s,
        lambda2_signed: s,
        lambda_min: r.min.max(0.0).sqrt(),
        two_sided: s,
        iterations: r.steps,
        residual: r.residual,
        converged: r.residual < opts.tol,
        method: SpectralMethod::Lanczos,
    })
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    par::sum_f64(x.len(), |i| x[i] * y[i])
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn deflate_mean(x: &mut [f64]) {
    let m = par::sum_f64(x.len(), |i| x[i]) / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    deflate_mean(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest Krylov basis kept in memory.
pub const LANCZOS_MAX_DIM: usize = 2000;

struct Extremes {
    max: f64,
    min: f64,
    steps: usize,
    residual: f64,
}

/// Lanczos with full reorthogonalization on the complement of constants.
/// Converged when both extreme Ritz pairs have residual below `tol`.
fn lanczos_extremes(op: &dyn Fn(&[f64], &mut [f64]), n: usize, opts: &SpectralOptions) -> Result<Extremes> {
    if n < 2 {
        return Err(LabError::Invalid("graph needs at least two vertices".into()));
    }
    let dim_cap = 1.max((n - 1).min(opts.max_iter).min(LANCZOS_MAX_DIM));
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n, opts.seed)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    loop {
        let j = basis.len() - 1;
        op(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let h = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
            deflate_mean(&mut w);
        }
        let b = norm(&w);
        let steps = alpha.len();
        let check = steps.is_multiple_of(8) || steps == dim_cap || b < 1e-13;
        if check {
            let (max, min, rmax, rmin) = tridiag_extremes(&alpha, &beta, b);
            let mut last = Extremes { max, min, steps, residual: rmax.max(rmin) };
            if last.residual < opts.tol || steps >= dim_cap || b < 1e-13 {
                if b < 1e-13 {
                    // invariant subspace: the Ritz values are exact
                    last.residual = last.residual.min(b);
                }
                return Ok(last);
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// Extreme eigenvalues of the Lanczos tridiagonal and their Ritz residuals
/// `|b_next * s_last|`.
fn tridiag_extremes(alpha: &[f64], beta: &[f64], b_next: f64) -> (f64, f64, f64, f64) {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![0.0; m];
    e[..m - 1].copy_from_slice(&beta[..m - 1]);
    let mut z = vec![0.0; m];
    z[m - 1] = 1.0;
    tqli_last_row(&mut d, &mut e, &mut z);
    let (mut imax, mut imin) = (0, 0);
    for i in 0..m {
        if d[i] > d[imax] {
            imax = i;
        }
        if d[i] < d[imin] {
            imin = i;
        }
    }
    (d[imax], d[imin], (b_next * z[imax]).abs(), (b_next * z[imin]).abs())
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the last
/// row of the eigenvector matrix. `e[i]` couples `i` and `i+1`.
fn tqli_last_row(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Power iteration on `(M + I)/2` with mean deflation. Returns the largest
/// eigenvalue of `M` on the complement of constants, steps, and residual.
fn power_shifted(op: &dyn Fn(&[f64], &mut [f64]), n: usize, opts: &SpectralOptions) -> (f64, usize, f64) {
    let mut v = start_vector(n, opts.seed);
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut steps = 0;
    while steps < opts.max_iter {
        steps += 1;
        op(&v, &mut y);
        // residual of M itself before the shift
        lambda = dot(&v, &y);
        residual = par::sum_f64(n, |i| (y[i] - lambda * v[i]).powi(2)).sqrt();
        if residual < opts.tol {
            break;
        }
        y.iter_mut().zip(&v).for_each(|(a, b)| *a = 0.5 * (*a + b));
        deflate_mean(&mut y);
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        v.iter_mut().zip(&y).for_each(|(a, b)| *a = b / ny);
    }
    (lambda, steps, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::Sl2Group;

    fn sl2(p: u64) -> (FieldCtx, Sl2Group) {
        let f = FieldCtx::new(p).unwrap();
        (f.clone(), Sl2Group::new(f))
    }

    #[test]
    fn bg_generator_examples() {
        let (f, _) = sl2(13);
        let w = Mat2::w(&f);
        let s = build_generator_set_bg(&f, &w, 1).unwrap();
        assert_eq!(s, vec![Mat2::from_ints(&f, [-2, -5, 1, 2]).unwrap()]);
        let s3 = build_generator_set_bg(&f, &w, 3).unwrap();
        assert_eq!(s3.len(), 3);
        for (j, h) in s3.iter().enumerate() {
            // independent route: conjugation by u_{2j}
            let x = f.elem(2 * (j as i64 + 1));
            assert_eq!(*h, w.conjugate(&f, &Mat2::u(&f, x)));
        }
        assert_eq!(build_generator_set_bg(&f, &Mat2::u(&f, f.one()), 2), Err(LabError::BorelElement));
    }

    #[test]
    fn cycle_girth_and_spectrum() {
        for p in [11usize, 101, 1009] {
            let g = CayleyGraph::cyclic(p, &[1, -1]).unwrap();
            assert!(g.is_symmetric());
            assert_eq!(g.girth().unwrap(), Some(p));
            let r = second_eigenvalue(&g, &SpectralOptions::default()).unwrap();
            let want = (2.0 * std::f64::consts::PI / p as f64).cos();
            assert!((r.lambda2 - want).abs() < 1e-7, "p={p}: {} vs {want}", r.lambda2);
            assert!(r.converged);
            assert!((r.lambda_min + (std::f64::consts::PI / p as f64).cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn power_route_agrees_on_small_cycle() {
        let g = CayleyGraph::cyclic(11, &[1, -1]).unwrap();
        let opts = SpectralOptions { method: SpectralMethod::Power, ..Default::default() };
        let r = second_eigenvalue(&g, &opts).unwrap();
        assert!(r.converged);
        assert!((r.lambda2 - (2.0 * std::f64::consts::PI / 11.0).cos()).abs() < 1e-7);
    }

    #[test]
    fn complete_graph_on_sl2_f5() {
        let (_, grp) = sl2(5);
        let gens: Vec<Mat2> = grp.iter().filter(|m| !m.is_identity()).collect();
        let g = CayleyGraph::sl2(&grp, &gens).unwrap();
        let r = second_eigenvalue(&g, &SpectralOptions::default()).unwrap();
        assert!((r.lambda2 - 1.0 / 119.0).abs() < 1e-9);
        assert!((r.lambda2_signed + 1.0 / 119.0).abs() < 1e-9);
        assert_eq!(g.girth().unwrap(), Some(3));
    }

    /// Girth by exhaustive BFS from every vertex.
    fn girth_oracle(n: usize, nbrs: &dyn Fn(usize) -> Vec<usize>) -> Option<usize> {
        let mut best = None::<usize>;
        for r in 0..n {
            let mut dist = vec![usize::MAX; n];
            let mut par = vec![usize::MAX; n];
            dist[r] = 0;
            let mut q = VecDeque::from([r]);
            while let Some(u) = q.pop_front() {
                for v in nbrs(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        par[v] = u;
                        q.push_back(v);
                    } else if par[u] != v {
                        let len = dist[u] + dist[v] + 1;
                        best = Some(best.map_or(len, |b: usize| b.min(len)));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn sl2_f5_unipotent_girth() {
        let (f, grp) = sl2(5);
        let gens = vec![
            Mat2::u(&f, f.elem(1)),
            Mat2::u(&f, f.elem(-1)),
            Mat2::u_star(&f, f.elem(1)),
            Mat2::u_star(&f, f.elem(-1)),
        ];
        let g = CayleyGraph::sl2(&grp, &gens).unwrap();
        assert!(g.is_symmetric());
        let elems: Vec<Mat2> = grp.iter().collect();
        let want = girth_oracle(120, &|u| gens.iter().map(|s| grp.index(&elems[u].mul(&f, s))).collect());
        assert_eq!(g.girth().unwrap(), want);
        assert!(want.unwrap() >= 3);
    }

    #[test]
    fn identity_generator_rejected() {
        let (f, grp) = sl2(5);
        let g = CayleyGraph::sl2(&grp, &[Mat2::identity(&f), Mat2::w(&f)]).unwrap();
        assert_eq!(g.girth(), Err(LabError::IdentityGenerator));
        let c = CayleyGraph::cyclic(7, &[0, 1, -1]).unwrap();
        assert_eq!(c.girth(), Err(LabError::IdentityGenerator));
    }

    #[test]
    fn disconnected_rejected() {
        let g = CayleyGraph::cyclic(12, &[3, -3]).unwrap();
        assert_eq!(
            second_eigenvalue(&g, &SpectralOptions::default()).unwrap_err(),
            LabError::NotConnected { reached: 4, total: 12 }
        );
    }

    #[test]
    fn directed_girth_is_relation_length() {
        let g = CayleyGraph::cyclic(9, &[2, 3]).unwrap();
        assert!(!g.is_symmetric());
        // shortest positive combination 2a + 3b = 9: a=3,b=1 -> 4 letters; b=3 -> 3
        assert_eq!(g.girth().unwrap(), Some(3));
    }

    #[test]
    fn singular_value_path_matches_symmetric_case() {
        let g = CayleyGraph::cyclic(31, &[1, -1]).unwrap();
        let r = second_singular_value(&g, &SpectralOptions::default()).unwrap();
        // singular values of the cycle are |cos(2πk/p)|, largest nontrivial cos(π/p)
        assert!((r.lambda2 - (std::f64::consts::PI / 31.0).cos()).abs() < 1e-7);
    }

    #[test]
    fn sl2_bg_spectrum_is_nontrivial() {
        let (f, grp) = sl2(13);
        let s = symmetrize(&f, &build_generator_set_bg(&f, &Mat2::w(&f), 3).unwrap());
        let g = CayleyGraph::sl2(&grp, &s).unwrap();
        let a = second_eigenvalue(&g, &SpectralOptions::default()).unwrap();
        let b = second_eigenvalue(&g, &SpectralOptions { seed: 99, ..Default::default() }).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.lambda2 < 1.0);
        assert!((a.lambda2 - b.lambda2).abs() < 1e-7);
        let again = second_eigenvalue(&g, &SpectralOptions::default()).unwrap();
        assert_eq!(a, again);
    }
}
