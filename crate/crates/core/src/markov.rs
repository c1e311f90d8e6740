//! The lazy Moebius chain `X -> g(X) + ε` on P^1(F_p), evolved exactly or
//! simulated.
//!
//! States are indexed as in [`ProjPoint::index`], so `∞` is state `p`, and
//! `∞ + ε = ∞`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, Fp};
use crate::par;
use crate::sl2::{Mat2, ProjPoint};

/// Largest p evolved with exact rationals by default.
pub const EXACT_MAX_P: u64 = 1000;

/// Trials per Monte Carlo work unit; each unit owns one generator stream.
const TRIAL_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Laziness {
    /// Stay with probability 1/2, else `g(x) ± γ`.
    HalfLazy,
    /// `g(x) + ε` with `ε` uniform on `{0, γ, -γ}`.
    ThreePoint,
}

impl std::str::FromStr for Laziness {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-lazy" | "half" => Ok(Laziness::HalfLazy),
            "three-point" | "three" => Ok(Laziness::ThreePoint),
            _ => Err(LabError::Invalid(format!("unknown chain variant '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainSpec {
    g: Mat2,
    gamma: Fp,
    laziness: Laziness,
    p: u64,
    /// `g` on P^1 by state index
    image: Vec<u32>,
}

impl ChainSpec {
    pub fn new(f: &FieldCtx, g: Mat2, gamma: Fp, laziness: Laziness) -> Result<Self> {
        if g.is_borel() {
            return Err(LabError::BorelElement);
        }
        if gamma.is_zero() {
            return Err(LabError::Invalid("gamma must be nonzero".into()));
        }
        let p = f.p();
        let image = (0..=p as usize).map(|i| g.mobius(f, ProjPoint::from_index(f, i)).index(p) as u32).collect();
        Ok(ChainSpec { g, gamma, laziness, p, image })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn g(&self) -> Mat2 {
        self.g
    }

    pub fn gamma(&self) -> Fp {
        self.gamma
    }

    pub fn laziness(&self) -> Laziness {
        self.laziness
    }

    pub fn states(&self) -> usize {
        self.p as usize + 1
    }

    #[inline]
    fn shift(&self, x: u32, eps: u64) -> u32 {
        if x as u64 == self.p {
            x
        } else {
            ((x as u64 + eps) % self.p) as u32
        }
    }

    /// Targets of one step from `x`, with their weights out of `base`.
    fn moves(&self, x: usize) -> [(u32, u32); 3] {
        let gx = self.image[x];
        let (up, down) = (self.shift(gx, self.gamma.value()), self.shift(gx, self.p - self.gamma.value()));
        match self.laziness {
            Laziness::HalfLazy => [(x as u32, 2), (up, 1), (down, 1)],
            Laziness::ThreePoint => [(gx, 1), (up, 1), (down, 1)],
        }
    }

    fn base(&self) -> u32 {
        match self.laziness {
            Laziness::HalfLazy => 4,
            Laziness::ThreePoint => 3,
        }
    }

    /// One random step.
    fn sample<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        let r = rng.gen_range(0..self.base());
        let mut acc = 0;
        for (y, w) in self.moves(x) {
            acc += w;
            if r < acc {
                return y as usize;
            }
        }
        unreachable!("weights sum to base")
    }
}

/// A law on P^1(F_p).
#[derive(Clone, Debug, PartialEq)]
pub enum Dist {
    /// `num[i] / den`.
    Exact {
        num: Vec<BigUint>,
        den: BigUint,
    },
    Float(Vec<f64>),
}

impl Dist {
    pub fn point_exact(states: usize, x: usize) -> Self {
        let mut num = vec![BigUint::zero(); states];
        num[x] = BigUint::one();
        Dist::Exact { num, den: BigUint::one() }
    }

    pub fn point_float(states: usize, x: usize) -> Self {
        let mut v = vec![0.0; states];
        v[x] = 1.0;
        Dist::Float(v)
    }

    pub fn uniform_exact(states: usize) -> Self {
        Dist::Exact { num: vec![BigUint::one(); states], den: BigUint::from(states) }
    }

    pub fn len(&self) -> usize {
        match self {
            Dist::Exact { num, .. } => num.len(),
            Dist::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prob(&self, i: usize) -> f64 {
        match self {
            Dist::Exact { num, den } => {
                BigRational::new(BigInt::from(num[i].clone()), BigInt::from(den.clone())).to_f64().unwrap_or(f64::NAN)
            }
            Dist::Float(v) => v[i],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.prob(i)).collect()
    }

    /// Exact mode: numerators sum to the denominator. Float mode: within 1e-12.
    pub fn is_normalized(&self) -> bool {
        match self {
            Dist::Exact { num, den } => num.iter().sum::<BigUint>() == *den,
            Dist::Float(v) => (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
        }
    }

    /// Exact equality of laws (the exact representation is not reduced).
    pub fn same_law(&self, other: &Dist) -> bool {
        match (self, other) {
            (Dist::Exact { num: a, den: da }, Dist::Exact { num: b, den: db }) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x * db == y * da)
            }
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

/// Exact push-forward by one step.
pub fn step_distribution(spec: &ChainSpec, d: &Dist) -> Dist {
    match d {
        Dist::Exact { num, den } => {
            let mut out = vec![BigUint::zero(); num.len()];
            for (x, m) in num.iter().enumerate() {
                if m.is_zero() {
                    continue;
                }
                for (y, w) in spec.moves(x) {
                    out[y as usize] += m * w;
                }
            }
            Dist::Exact { num: out, den: den * spec.base() }
        }
        Dist::Float(v) => {
            let mut out = vec![0.0; v.len()];
            let base = spec.base() as f64;
            for (x, &m) in v.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for (y, w) in spec.moves(x) {
                    out[y as usize] += m * w as f64 / base;
                }
            }
            Dist::Float(out)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Reference {
    /// Uniform on all `p + 1` states.
    UniformP1,
    /// Uniform on `F_p^*`; `0` and `∞` count fully against.
    UniformFpStar,
}

/// `½ Σ |d_i - u_i|`.
pub fn tv_distance(d: &Dist, reference: Reference) -> f64 {
    let states = d.len();
    let p = states - 1;
    let support = |i: usize| match reference {
        Reference::UniformP1 => true,
        Reference::UniformFpStar => i != 0 && i != p,
    };
    let m = match reference {
        Reference::UniformP1 => states,
        Reference::UniformFpStar => p - 1,
    };
    match d {
        Dist::Exact { num, den } => {
            // ½ Σ |num_i m - den| / (m den) over the support, plus the mass outside
            let scaled = BigInt::from(den.clone());
            let mut inside = BigInt::zero();
            let mut outside = BigUint::zero();
            for (i, x) in num.iter().enumerate() {
                if support(i) {
                    inside += (BigInt::from(x.clone()) * m - &scaled).abs();
                } else {
                    outside += x;
                }
            }
            let total = inside + BigInt::from(outside) * m;
            let tv = BigRational::new(total, scaled * m * 2);
            tv.to_f64().unwrap_or(f64::NAN)
        }
        Dist::Float(v) => {
            let u = 1.0 / m as f64;
            0.5 * par::sum_f64(v.len(), |i| if support(i) { (v[i] - u).abs() } else { v[i] })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixRow {
    pub n: usize,
    pub tv_p1: f64,
    pub tv_fpstar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixProfile {
    pub rows: Vec<MixRow>,
    /// Least-squares slope of `ln tv_p1` against `n`, over rows with `tv_p1 > 0`.
    pub slope: f64,
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMode {
    /// Exact for `p <= EXACT_MAX_P`, floats beyond.
    Auto,
    Exact,
    Float,
}

/// Evolve a point mass at `start` for `n = 0..=n_max`.
pub fn mix_profile(spec: &ChainSpec, start: ProjPoint, n_max: usize, mode: EvolveMode) -> Result<MixProfile> {
    if n_max < 1 {
        return Err(LabError::Invalid("n_max must be at least 1".into()));
    }
    let exact = match mode {
        EvolveMode::Auto => spec.p <= EXACT_MAX_P,
        EvolveMode::Exact => true,
        EvolveMode::Float => false,
    };
    let x0 = start.index(spec.p);
    let mut d = if exact { Dist::point_exact(spec.states(), x0) } else { Dist::point_float(spec.states(), x0) };
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            d = step_distribution(spec, &d);
        }
        rows.push(MixRow {
            n,
            tv_p1: tv_distance(&d, Reference::UniformP1),
            tv_fpstar: tv_distance(&d, Reference::UniformFpStar),
        });
    }
    let slope = log_slope(&rows);
    Ok(MixProfile { rows, slope, exact })
}

fn log_slope(rows: &[MixRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.tv_p1 > 0.0).map(|r| (r.n as f64, r.tv_p1.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Counts of `X_n` over `trials` runs started at `start`.
///
/// Trials are cut into fixed chunks; chunk `c` draws from stream `c` of a
/// generator seeded with `seed`, so the result does not depend on threads.
pub fn simulate_counts(spec: &ChainSpec, start: ProjPoint, n: usize, trials: u64, seed: u64) -> Result<Vec<u64>> {
    if trials < 1 {
        return Err(LabError::Invalid("trials must be at least 1".into()));
    }
    let x0 = start.index(spec.p);
    let chunks = trials.div_ceil(TRIAL_CHUNK) as usize;
    let parts = par::map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let lo = c as u64 * TRIAL_CHUNK;
        let hi = (lo + TRIAL_CHUNK).min(trials);
        let mut counts = vec![0u64; spec.states()];
        for _ in lo..hi {
            let mut x = x0;
            for _ in 0..n {
                x = spec.sample(x, &mut rng);
            }
            counts[x] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; spec.states()];
    for part in parts {
        counts.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    Ok(counts)
}

/// Empirical law of `X_n`.
pub fn simulate(spec: &ChainSpec, start: ProjPoint, n: usize, trials: u64, seed: u64) -> Result<Dist> {
    let counts = simulate_counts(spec, start, n, trials, seed)?;
    Ok(Dist::Exact { num: counts.into_iter().map(BigUint::from).collect(), den: BigUint::from(trials) })
}

/// `½ Σ |a_i - b_i|`.
pub fn tv_between(a: &Dist, b: &Dist) -> f64 {
    let (x, y) = (a.to_f64(), b.to_f64());
    0.5 * x.iter().zip(&y).map(|(u, v)| (u - v).abs()).sum::<f64>()
}
