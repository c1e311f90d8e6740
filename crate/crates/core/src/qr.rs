//! Gaps and runs of quadratic residues, the ratio-set count, and the
//! interval inclusion scan.
//!
//! `d(p)` is the largest cyclic gap between consecutive residues: with
//! residues `r_1 < ... < r_m` in `[1, p)`, the maximum of `r_{i+1} - r_i`
//! and the wrap gap `r_1 + p - r_m`.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{primes_up_to, FieldCtx, Fp};
use crate::par;

/// `p^{1/4} log_2 p`.
pub fn gap_scale(p: u64) -> f64 {
    let pf = p as f64;
    pf.powf(0.25) * pf.log2()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub p: u64,
    pub d: u64,
    /// `d / (p^{1/4} log_2 p)`
    pub ratio: f64,
    /// Residue at the left end of the first maximal gap.
    pub gap_start: u64,
    /// Longest run of consecutive residues, and where it starts.
    pub residue_run: u64,
    pub residue_run_start: u64,
    /// Longest run of consecutive non-residues in `[1, p)`.
    pub nonresidue_run: u64,
    pub nonresidue_run_start: u64,
}

/// Streaming Legendre scan over `1..p`.
pub fn qr_gap(f: &FieldCtx) -> GapReport {
    let p = f.p();
    let (mut first, mut prev) = (None, 0u64);
    let (mut d, mut gap_start) = (0, 0);
    let mut runs = [(0u64, 0u64); 2];
    let (mut cur_kind, mut cur_start, mut cur_len) = (usize::MAX, 0, 0);
    for x in 1..p {
        let res = f.is_square(Fp::from_reduced(x));
        let kind = usize::from(!res);
        if kind == cur_kind {
            cur_len += 1;
        } else {
            cur_kind = kind;
            cur_start = x;
            cur_len = 1;
        }
        if cur_len > runs[kind].0 {
            runs[kind] = (cur_len, cur_start);
        }
        if res {
            if first.is_none() {
                first = Some(x);
            } else if x - prev > d {
                d = x - prev;
                gap_start = prev;
            }
            prev = x;
        }
    }
    let wrap = first.unwrap_or(1) + p - prev;
    if wrap > d {
        d = wrap;
        gap_start = prev;
    }
    GapReport {
        p,
        d,
        ratio: d as f64 / gap_scale(p),
        gap_start,
        residue_run: runs[0].0,
        residue_run_start: runs[0].1,
        nonresidue_run: runs[1].0,
        nonresidue_run_start: runs[1].1,
    }
}

/// One row of the prime-range scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub p: u64,
    pub d: u64,
    pub ratio: f64,
    pub gap_start: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapScan {
    pub rows: Vec<GapRow>,
    /// Largest ratio over rows with `p >= max_from`, and its prime.
    pub max_ratio: f64,
    pub argmax: u64,
    pub max_from: u64,
}

/// Marks the squares `y^2`, `1 <= y <= (p-1)/2`, in `bits`.
///
/// Eight interleaved difference sequences keep independent adds in flight:
/// stream `k` walks `y = k+1, k+9, ...` and steps by `16y + 64`.
fn mark_squares(p: usize, bits: &mut [u64]) {
    const K: usize = 8;
    let half = (p - 1) / 2;
    let mut s = [0usize; K];
    let mut inc = [0usize; K];
    for k in 0..K {
        let y = k + 1;
        s[k] = y * y % p;
        inc[k] = (2 * K * y + K * K) % p;
    }
    let step = 2 * K * K % p;
    let mut y = 1;
    while y + K - 1 <= half {
        for k in 0..K {
            let v = s[k];
            bits[v >> 6] |= 1 << (v & 63);
            // all terms stay below 2p, so wrapping adds never wrap
            let v = v.wrapping_add(inc[k]);
            s[k] = if v >= p { v.wrapping_sub(p) } else { v };
            let v = inc[k].wrapping_add(step);
            inc[k] = if v >= p { v.wrapping_sub(p) } else { v };
        }
        y += K;
    }
    while y <= half {
        let v = y * y % p;
        bits[v >> 6] |= 1 << (v & 63);
        y += 1;
    }
}

/// Largest cyclic gap of the set bits in `[0, p)` and its left end.
///
/// Words whose inner zero runs are all shorter than the current maximum are
/// skipped without visiting their bits.
fn max_gap_bits(p: usize, bits: &[u64]) -> (u64, u64) {
    let (mut maxg, mut start) = (0usize, 0usize);
    let mut first = None;
    let mut prev = 0usize;
    for (i, &wd) in bits.iter().enumerate() {
        if wd == 0 {
            continue;
        }
        let lo = wd.trailing_zeros() as usize;
        let hi = 63 - wd.leading_zeros() as usize;
        let pos = i * 64 + lo;
        if first.is_none() {
            first = Some(pos);
        } else if pos - prev > maxg {
            maxg = pos - prev;
            start = prev;
        }
        if hi - lo > maxg {
            let span = if hi == 63 { u64::MAX } else { (1u64 << (hi + 1)) - 1 };
            let mut m = !wd & span & !((1u64 << lo) - 1);
            // m keeps the starts of zero runs of length >= maxg
            let l = maxg;
            if l > 0 {
                let mut k = 1;
                while k * 2 <= l {
                    m &= m >> k;
                    k *= 2;
                }
                m &= m >> (l - k);
            }
            if l == 0 || m != 0 {
                let mut v = wd & (wd - 1);
                let mut pr = pos;
                while v != 0 {
                    let r = i * 64 + v.trailing_zeros() as usize;
                    if r - pr > maxg {
                        maxg = r - pr;
                        start = pr;
                    }
                    pr = r;
                    v &= v - 1;
                }
            }
        }
        prev = i * 64 + hi;
    }
    let wrap = first.unwrap_or(0) + p - prev;
    if wrap > maxg {
        maxg = wrap;
        start = prev;
    }
    (maxg as u64, start as u64)
}

/// `d(p)` from the squares bitmap; agrees with [`qr_gap`].
pub fn qr_gap_fast(p: u64) -> GapRow {
    let mut bits = vec![0u64; p as usize / 64 + 1];
    mark_squares(p as usize, &mut bits);
    let (d, gap_start) = max_gap_bits(p as usize, &bits);
    GapRow { p, d, ratio: d as f64 / gap_scale(p), gap_start }
}

/// `d(p)` for every odd prime `p <= limit`; the running maximum is taken over
/// `p >= max_from`.
pub fn gap_scan(limit: u64, max_from: u64) -> GapScan {
    let primes: Vec<u64> = primes_up_to(limit).into_iter().filter(|&p| p > 2).collect();
    const CHUNK: usize = 512;
    let chunks: Vec<&[u64]> = primes.chunks(CHUNK).collect();
    let rows: Vec<GapRow> = par::map_slice(&chunks, |ps| {
        let mut bits = vec![0u64; (*ps.last().unwrap() as usize) / 64 + 1];
        ps.iter()
            .map(|&p| {
                let w = p as usize / 64 + 1;
                bits[..w].fill(0);
                mark_squares(p as usize, &mut bits[..w]);
                let (d, gap_start) = max_gap_bits(p as usize, &bits[..w]);
                GapRow { p, d, ratio: d as f64 / gap_scale(p), gap_start }
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let (mut max_ratio, mut argmax) = (0.0, 0);
    for r in rows.iter().filter(|r| r.p >= max_from) {
        if r.ratio > max_ratio {
            max_ratio = r.ratio;
            argmax = r.p;
        }
    }
    GapScan { rows, max_ratio, argmax, max_from }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioSetReport {
    pub count: u64,
    /// `H_* H`
    pub lower: u64,
    /// `count / (H_* H)`
    pub ratio: f64,
}

/// `|{y / (a + x) : x ∈ [1, H], y ∈ [1, H_*]}|`.
pub fn ratio_set_count(f: &FieldCtx, a: u64, h: u64, hstar: u64) -> Result<RatioSetReport> {
    let p = f.p();
    if h == 0 || hstar == 0 {
        return Err(LabError::HypothesisViolated("H and H_* must be positive".into()));
    }
    if hstar > h {
        return Err(LabError::HypothesisViolated(format!("H_* = {hstar} exceeds H = {h}")));
    }
    if a.checked_add(h).is_none_or(|s| s >= p) {
        return Err(LabError::HypothesisViolated(format!("a + H = {} is not below p = {p}", a as u128 + h as u128)));
    }
    if 16 * (hstar as u128).pow(2) * h as u128 >= p as u128 {
        return Err(LabError::HypothesisViolated(format!(
            "16 H_*^2 H = {} is not below p = {p}",
            16 * hstar * hstar * h
        )));
    }
    let mut seen = FixedBitSet::with_capacity(p as usize);
    for x in 1..=h {
        let inv = f.inv(f.from_u64(a + x))?;
        for y in 1..=hstar {
            seen.insert(f.mul(inv, f.from_u64(y)).value() as usize);
        }
    }
    let count = seen.count_ones(..) as u64;
    let lower = hstar * h;
    Ok(RatioSetReport { count, lower, ratio: count as f64 / lower as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Residue,
    NonResidue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunCheck {
    pub kind: RunKind,
    /// `P_a = a + {0, ..., len-1}`
    pub a: u64,
    pub len: u64,
    pub k: u64,
    pub checked: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub p: u64,
    pub checks: Vec<RunCheck>,
    pub violations: u64,
}

/// For the longest residue run and the longest non-residue run `P_a` of
/// length `L`, with `P_0^{1/m} = {0, ..., ⌊(L-1)/m⌋}` and
/// `P_a^{1/m} = a + P_0^{1/m}`, checks for `k = 1..=k_max` that every
/// `z = x / y`, `x ∈ P_0^{1/2k}`, `y ∈ P_a^{1/2}`, has `j z + 1 ∈ R` for
/// all `j ∈ [1, k]`.
pub fn residue_run_inclusion_check(f: &FieldCtx, k_max: u64) -> InclusionReport {
    let rep = qr_gap(f);
    let runs = [
        (RunKind::Residue, rep.residue_run_start, rep.residue_run),
        (RunKind::NonResidue, rep.nonresidue_run_start, rep.nonresidue_run),
    ];
    let mut checks = Vec::new();
    for (kind, a, len) in runs {
        if len == 0 {
            continue;
        }
        for k in 1..=k_max {
            let (mut checked, mut violations) = (0, 0);
            let top_x = (len - 1) / (2 * k);
            let top_y = (len - 1) / 2;
            for y in 0..=top_y {
                let inv = f.inv(f.from_u64(a + y)).expect("runs avoid 0");
                for x in 0..=top_x {
                    let z = f.mul(f.from_u64(x), inv);
                    for j in 1..=k {
                        checked += 1;
                        if !f.is_square(f.add(f.mul(f.from_u64(j), z), f.one())) {
                            violations += 1;
                        }
                    }
                }
            }
            checks.push(RunCheck { kind, a, len, k, checked, violations });
        }
    }
    let violations = checks.iter().map(|c| c.violations).sum();
    InclusionReport { p: f.p(), checks, violations }
}
