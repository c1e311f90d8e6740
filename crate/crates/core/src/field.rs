//! Arithmetic in F_p, its quadratic extension F_p[i] for p = 3 mod 4, and the
//! Gaussian integers Z[i].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Inverse and Legendre tables are cached for every p up to this bound.
pub const TABLE_THRESHOLD: u64 = 1 << 20;

/// An element of F_p, always reduced into `[0, p)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fp(u64);

impl Fp {
    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Wrap a value already known to lie in `[0, p)`.
    #[inline]
    pub(crate) fn from_reduced(x: u64) -> Fp {
        Fp(x)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Deterministic trial division.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// All primes `<= n` by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    let n = n as usize;
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Modular inverse by the extended Euclidean algorithm; `None` when
/// `gcd(x, m) != 1`.
pub fn inv_euclid(x: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (x % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// The prime field F_p with optional cached tables.
///
/// Immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct FieldCtx {
    p: u64,
    inv_table: Option<Vec<u32>>,
    legendre_table: Option<Vec<i8>>,
}

impl FieldCtx {
    /// Field of an odd prime `p < 2^32`, with tables when `p <= TABLE_THRESHOLD`.
    pub fn new(p: u64) -> Result<Self> {
        Self::with_threshold(p, TABLE_THRESHOLD)
    }

    /// Like [`FieldCtx::new`] but caches tables only when `p <= threshold`.
    pub fn with_threshold(p: u64, threshold: u64) -> Result<Self> {
        if !(3..(1 << 32)).contains(&p) || !is_prime(p) {
            return Err(LabError::NotPrime(p));
        }
        let (inv_table, legendre_table) =
            if p <= threshold { (Some(build_inv_table(p)), Some(build_legendre_table(p))) } else { (None, None) };
        Ok(FieldCtx { p, inv_table, legendre_table })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn has_tables(&self) -> bool {
        self.inv_table.is_some()
    }

    /// Reduce an arbitrary signed integer.
    #[inline]
    pub fn elem(&self, x: i64) -> Fp {
        Fp(x.rem_euclid(self.p as i64) as u64)
    }

    #[inline]
    pub fn from_u64(&self, x: u64) -> Fp {
        Fp(x % self.p)
    }

    #[inline]
    pub fn zero(&self) -> Fp {
        Fp(0)
    }

    #[inline]
    pub fn one(&self) -> Fp {
        Fp(1)
    }

    /// Iterate over every element `0, 1, ..., p-1`.
    pub fn elements(&self) -> impl Iterator<Item = Fp> {
        (0..self.p).map(Fp)
    }

    #[inline]
    pub fn add(&self, x: Fp, y: Fp) -> Fp {
        let s = x.0 + y.0;
        Fp(if s >= self.p { s - self.p } else { s })
    }

    #[inline]
    pub fn sub(&self, x: Fp, y: Fp) -> Fp {
        Fp(if x.0 >= y.0 { x.0 - y.0 } else { x.0 + self.p - y.0 })
    }

    #[inline]
    pub fn neg(&self, x: Fp) -> Fp {
        Fp(if x.0 == 0 { 0 } else { self.p - x.0 })
    }

    #[inline]
    pub fn mul(&self, x: Fp, y: Fp) -> Fp {
        Fp(x.0 * y.0 % self.p)
    }

    pub fn pow(&self, x: Fp, mut e: u64) -> Fp {
        let mut base = x;
        let mut acc = Fp(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; table lookup when cached, extended Euclid otherwise.
    #[inline]
    pub fn inv(&self, x: Fp) -> Result<Fp> {
        if x.0 == 0 {
            return Err(LabError::ZeroInverse);
        }
        match &self.inv_table {
            Some(t) => Ok(Fp(t[x.0 as usize] as u64)),
            None => Ok(Fp(inv_euclid(x.0, self.p).expect("p is prime"))),
        }
    }

    pub fn div(&self, x: Fp, y: Fp) -> Result<Fp> {
        Ok(self.mul(x, self.inv(y)?))
    }

    /// Quadratic character: `1` on nonzero squares, `0` at zero, `-1` otherwise.
    #[inline]
    pub fn legendre(&self, x: Fp) -> i8 {
        match &self.legendre_table {
            Some(t) => t[x.0 as usize],
            None => self.legendre_euler(x),
        }
    }

    /// Euler's criterion `x^((p-1)/2)`, bypassing the table.
    pub fn legendre_euler(&self, x: Fp) -> i8 {
        if x.0 == 0 {
            return 0;
        }
        if self.pow(x, (self.p - 1) / 2).0 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn is_square(&self, x: Fp) -> bool {
        self.legendre(x) == 1
    }

    /// Smallest generator of the cyclic group F_p^*.
    pub fn primitive_root(&self) -> Fp {
        let n = self.p - 1;
        let factors = distinct_prime_factors(n);
        (2..self.p).map(Fp).find(|&g| factors.iter().all(|&q| self.pow(g, n / q).0 != 1)).unwrap_or(Fp(1))
    }

    /// Smallest quadratic non-residue.
    pub fn smallest_non_residue(&self) -> Fp {
        (2..self.p).map(Fp).find(|&x| self.legendre(x) == -1).expect("odd prime")
    }
}

/// Distinct prime divisors of `n`.
pub fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn build_inv_table(p: u64) -> Vec<u32> {
    let mut inv = vec![0u32; p as usize];
    inv[1] = 1;
    for i in 2..p {
        let q = p / i;
        let r = (p % i) as usize;
        inv[i as usize] = ((p - q * inv[r] as u64 % p) % p) as u32;
    }
    inv
}

fn build_legendre_table(p: u64) -> Vec<i8> {
    let mut t = vec![-1i8; p as usize];
    t[0] = 0;
    let mut sq = 0u64;
    for y in 1..=(p - 1) / 2 {
        // (y)^2 = (y-1)^2 + 2y - 1
        sq += 2 * y - 1;
        sq %= p;
        t[sq as usize] = 1;
    }
    t
}

/// An element `re + i*im` of F_p[i], i^2 = -1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fq {
    pub re: Fp,
    pub im: Fp,
}

/// The field F_{p^2} = F_p[i]; requires p = 3 (mod 4) so that -1 is a non-square.
#[derive(Clone, Debug)]
pub struct FqCtx {
    base: FieldCtx,
}

impl FqCtx {
    pub fn new(base: FieldCtx) -> Result<Self> {
        if base.p() % 4 != 3 {
            return Err(LabError::BadPrime(base.p()));
        }
        Ok(FqCtx { base })
    }

    pub fn base(&self) -> &FieldCtx {
        &self.base
    }

    /// Number of elements, p^2.
    pub fn order(&self) -> u64 {
        self.base.p() * self.base.p()
    }

    pub fn elem(&self, re: i64, im: i64) -> Fq {
        Fq { re: self.base.elem(re), im: self.base.elem(im) }
    }

    /// Dense index `re * p + im` in `[0, p^2)`.
    #[inline]
    pub fn index(&self, z: Fq) -> usize {
        (z.re.value() * self.base.p() + z.im.value()) as usize
    }

    #[inline]
    pub fn from_index(&self, idx: usize) -> Fq {
        let p = self.base.p() as usize;
        Fq { re: Fp((idx / p) as u64), im: Fp((idx % p) as u64) }
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        Fq { re: self.base.add(a.re, b.re), im: self.base.add(a.im, b.im) }
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        Fq { re: self.base.sub(a.re, b.re), im: self.base.sub(a.im, b.im) }
    }

    /// (x+iy)(u+iv) = (xu - yv) + i(xv + yu)
    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        Fq { re: f.sub(f.mul(a.re, b.re), f.mul(a.im, b.im)), im: f.add(f.mul(a.re, b.im), f.mul(a.im, b.re)) }
    }

    /// Norm x^2 + y^2, which lies in F_p.
    pub fn norm(&self, a: Fq) -> Fp {
        let f = &self.base;
        f.add(f.mul(a.re, a.re), f.mul(a.im, a.im))
    }

    /// Inverse as conjugate over norm.
    pub fn inv(&self, a: Fq) -> Result<Fq> {
        let f = &self.base;
        let n = self.norm(a);
        // p = 3 mod 4 makes the norm anisotropic: zero only at a = 0.
        let ninv = f.inv(n)?;
        Ok(Fq { re: f.mul(a.re, ninv), im: f.mul(f.neg(a.im), ninv) })
    }

    pub fn is_zero(&self, a: Fq) -> bool {
        a.re.is_zero() && a.im.is_zero()
    }
}

/// A Gaussian integer with arbitrary-precision parts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GaussInt {
    pub re: BigInt,
    pub im: BigInt,
}

impl GaussInt {
    pub fn new(re: impl Into<BigInt>, im: impl Into<BigInt>) -> Self {
        GaussInt { re: re.into(), im: im.into() }
    }

    pub fn from_int(re: i64) -> Self {
        GaussInt::new(re, 0)
    }

    pub fn zero() -> Self {
        GaussInt::new(0, 0)
    }

    pub fn one() -> Self {
        GaussInt::new(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// |z|^2 = re^2 + im^2, exact.
    pub fn norm(&self) -> BigInt {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn conj(&self) -> Self {
        GaussInt { re: self.re.clone(), im: -&self.im }
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        GaussInt { re: &self.re * k, im: &self.im * k }
    }

    /// |z| as a float, for reporting.
    pub fn abs_f64(&self) -> f64 {
        self.norm().to_f64().unwrap_or(f64::INFINITY).sqrt()
    }
}

impl Add for &GaussInt {
    type Output = GaussInt;
    fn add(self, o: &GaussInt) -> GaussInt {
        GaussInt { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub for &GaussInt {
    type Output = GaussInt;
    fn sub(self, o: &GaussInt) -> GaussInt {
        GaussInt { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul for &GaussInt {
    type Output = GaussInt;
    fn mul(self, o: &GaussInt) -> GaussInt {
        GaussInt { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
}

impl Neg for &GaussInt {
    type Output = GaussInt;
    fn neg(self) -> GaussInt {
        GaussInt { re: -&self.re, im: -&self.im }
    }
}

impl fmt::Display for GaussInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write_imag(f, &self.im, false),
            (false, false) => {
                write!(f, "{}", self.re)?;
                write_imag(f, &self.im, true)
            }
        }
    }
}

fn write_imag(f: &mut fmt::Formatter<'_>, im: &BigInt, with_sign: bool) -> fmt::Result {
    let sign = if im.is_negative() {
        "-"
    } else if with_sign {
        "+"
    } else {
        ""
    };
    let mag = im.abs();
    if mag.is_one() {
        write!(f, "{sign}i")
    } else {
        write!(f, "{sign}{mag}i")
    }
}

impl FromStr for GaussInt {
    type Err = LabError;

    /// Accepts forms like `2`, `-3`, `2i`, `-i`, `2+i`, `1-3i`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Invalid(format!("cannot parse Gaussian integer '{s}'"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(bad());
        }
        if !t.ends_with('i') {
            let re: BigInt = t.parse().map_err(|_| bad())?;
            return Ok(GaussInt { re, im: BigInt::zero() });
        }
        let body = &t[..t.len() - 1];
        // split at the last sign that is not in leading position
        let split = body.char_indices().skip(1).filter(|&(_, c)| c == '+' || c == '-').map(|(i, _)| i).last();
        let (re_part, im_part) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let re: BigInt = re_part.parse().map_err(|_| bad())?;
        let im: BigInt = match im_part {
            "" | "+" => BigInt::one(),
            "-" => -BigInt::one(),
            x => x.trim_start_matches('+').parse().map_err(|_| bad())?,
        };
        Ok(GaussInt { re, im })
    }
}
