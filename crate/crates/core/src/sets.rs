//! Bitset-backed subsets of F_p and F_p[i], and a small textual spec
//! language for building them.

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, Fp, Fq, FqCtx};
use crate::shifts::Subgroup;

/// A subset of F_p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    bits: FixedBitSet,
    len: usize,
}

impl PointSet {
    pub fn empty(p: u64) -> Self {
        PointSet { bits: FixedBitSet::with_capacity(p as usize), len: 0 }
    }

    pub fn full(p: u64) -> Self {
        let mut bits = FixedBitSet::with_capacity(p as usize);
        bits.insert_range(..);
        PointSet { bits, len: p as usize }
    }

    /// Elements are reduced mod p; duplicates collapse.
    pub fn from_values(p: u64, values: impl IntoIterator<Item = u64>) -> Self {
        let mut bits = FixedBitSet::with_capacity(p as usize);
        for v in values {
            bits.insert((v % p) as usize);
        }
        let len = bits.count_ones(..);
        PointSet { bits, len }
    }

    pub fn from_elems(p: u64, values: impl IntoIterator<Item = Fp>) -> Self {
        Self::from_values(p, values.into_iter().map(Fp::value))
    }

    pub fn from_bits(bits: FixedBitSet) -> Self {
        let len = bits.count_ones(..);
        PointSet { bits, len }
    }

    /// Nonzero squares.
    pub fn residues(f: &FieldCtx) -> Self {
        Self::from_values(f.p(), f.elements().filter(|&x| f.legendre(x) == 1).map(Fp::value))
    }

    /// `{a, a+1, ..., b}` reduced mod p.
    pub fn interval(p: u64, a: i64, b: i64) -> Self {
        Self::from_values(p, (a..=b).map(|x| x.rem_euclid(p as i64) as u64))
    }

    /// `m` distinct elements drawn with a seeded generator.
    pub fn random(p: u64, m: usize, seed: u64) -> Result<Self> {
        if m > p as usize {
            return Err(LabError::Invalid(format!("cannot draw {m} distinct elements from F_{p}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rand::seq::index::sample(&mut rng, p as usize, m);
        Ok(Self::from_values(p, idx.into_iter().map(|i| i as u64)))
    }

    #[inline]
    pub fn contains(&self, x: Fp) -> bool {
        self.bits.contains(x.value() as usize)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    /// Elements in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = Fp> + '_ {
        self.bits.ones().map(|i| Fp::from_reduced(i as u64))
    }

    pub fn values(&self) -> Vec<u64> {
        self.bits.ones().map(|i| i as u64).collect()
    }
}

/// A subset of F_p[i], indexed by `re * p + im`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FqSet {
    bits: FixedBitSet,
    len: usize,
}

impl FqSet {
    pub fn from_indices(q: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = FixedBitSet::with_capacity(q);
        for i in idx {
            bits.insert(i % q);
        }
        let len = bits.count_ones(..);
        FqSet { bits, len }
    }

    pub fn full(q: usize) -> Self {
        Self::from_indices(q, 0..q)
    }

    pub fn from_elems(fq: &FqCtx, elems: impl IntoIterator<Item = Fq>) -> Self {
        Self::from_indices(fq.order() as usize, elems.into_iter().map(|z| fq.index(z)))
    }

    pub fn random(q: usize, m: usize, seed: u64) -> Result<Self> {
        if m > q {
            return Err(LabError::Invalid(format!("cannot draw {m} distinct elements from a field of size {q}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::from_indices(q, rand::seq::index::sample(&mut rng, q, m)))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }
}

/// Textual set constructors: `all`, `empty`, `qr`, `interval:a..b`,
/// `subgroup:d`, `list:x,y,...`, `random:m:seed`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetSpec {
    All,
    Empty,
    Residues,
    Interval(i64, i64),
    Subgroup(u64),
    List(Vec<i64>),
    Random { m: usize, seed: u64 },
}

impl SetSpec {
    pub fn build(&self, f: &FieldCtx) -> Result<PointSet> {
        let p = f.p();
        Ok(match self {
            SetSpec::All => PointSet::full(p),
            SetSpec::Empty => PointSet::empty(p),
            SetSpec::Residues => PointSet::residues(f),
            SetSpec::Interval(a, b) => PointSet::interval(p, *a, *b),
            SetSpec::Subgroup(d) => PointSet::from_elems(p, Subgroup::new(f, *d)?.elements().iter().copied()),
            SetSpec::List(v) => PointSet::from_values(p, v.iter().map(|&x| f.elem(x).value())),
            SetSpec::Random { m, seed } => PointSet::random(p, *m, *seed)?,
        })
    }

    /// Subsets of F_p[i]: `all`, `empty`, `random:m:seed`, or
    /// `list:re/im,re/im,...`.
    pub fn build_fq(&self, fq: &FqCtx) -> Result<FqSet> {
        let q = fq.order() as usize;
        match self {
            SetSpec::All => Ok(FqSet::full(q)),
            SetSpec::Empty => Ok(FqSet::from_indices(q, [])),
            SetSpec::Random { m, seed } => FqSet::random(q, *m, *seed),
            SetSpec::List(v) => {
                if v.len() % 2 != 0 {
                    return Err(LabError::Invalid("F_q list needs re/im pairs".into()));
                }
                Ok(FqSet::from_elems(fq, v.chunks(2).map(|c| fq.elem(c[0], c[1]))))
            }
            _ => Err(LabError::Invalid(format!("set '{self}' is not available over F_q"))),
        }
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::All => write!(f, "all"),
            SetSpec::Empty => write!(f, "empty"),
            SetSpec::Residues => write!(f, "qr"),
            SetSpec::Interval(a, b) => write!(f, "interval:{a}..{b}"),
            SetSpec::Subgroup(d) => write!(f, "subgroup:{d}"),
            SetSpec::List(v) => {
                let s: Vec<String> = v.iter().map(i64::to_string).collect();
                write!(f, "list:{}", s.join(","))
            }
            SetSpec::Random { m, seed } => write!(f, "random:{m}:{seed}"),
        }
    }
}

impl FromStr for SetSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Invalid(format!("cannot parse set spec '{s}'"));
        let int = |x: &str| x.trim().parse::<i64>().map_err(|_| bad());
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head.trim() {
            "all" => Ok(SetSpec::All),
            "empty" => Ok(SetSpec::Empty),
            "qr" => Ok(SetSpec::Residues),
            "interval" => {
                let (a, b) = rest.split_once("..").ok_or_else(bad)?;
                Ok(SetSpec::Interval(int(a)?, int(b)?))
            }
            "subgroup" => Ok(SetSpec::Subgroup(rest.trim().parse().map_err(|_| bad())?)),
            "list" => {
                if rest.trim().is_empty() {
                    return Ok(SetSpec::List(Vec::new()));
                }
                let v = rest.split([',', '/']).map(int).collect::<Result<Vec<_>>>()?;
                Ok(SetSpec::List(v))
            }
            "random" => {
                let (m, seed) = rest.split_once(':').ok_or_else(bad)?;
                Ok(SetSpec::Random {
                    m: m.trim().parse().map_err(|_| bad())?,
                    seed: seed.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}
