//! Words in `G = u*_s = (1 0 | s 1)` and `H = u_t = (1 t | 0 1)` over Z[i]:
//! evaluation, exhaustive ping-pong checks and reconstruction of a word from
//! its second column.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::GaussInt;
use crate::par;

/// A 2x2 matrix over Z[i].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat2Z {
    pub a: GaussInt,
    pub b: GaussInt,
    pub c: GaussInt,
    pub d: GaussInt,
}

impl Mat2Z {
    pub fn identity() -> Self {
        Mat2Z { a: GaussInt::one(), b: GaussInt::zero(), c: GaussInt::zero(), d: GaussInt::one() }
    }

    pub fn mul(&self, o: &Mat2Z) -> Mat2Z {
        Mat2Z {
            a: &(&self.a * &o.a) + &(&self.b * &o.c),
            b: &(&self.a * &o.b) + &(&self.b * &o.d),
            c: &(&self.c * &o.a) + &(&self.d * &o.c),
            d: &(&self.c * &o.b) + &(&self.d * &o.d),
        }
    }

    pub fn det(&self) -> GaussInt {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    /// The second column `(b, d)`.
    pub fn column2(&self) -> (GaussInt, GaussInt) {
        (self.b.clone(), self.d.clone())
    }

    /// Is this `lambda * I` for some lambda?
    pub fn is_scalar(&self) -> bool {
        self.b.is_zero() && self.c.is_zero() && self.a == self.d
    }
}

impl fmt::Display for Mat2Z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}|{},{})", self.a, self.b, self.c, self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    G,
    H,
}

impl Letter {
    pub fn other(self) -> Letter {
        match self {
            Letter::G => Letter::H,
            Letter::H => Letter::G,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block {
    pub letter: Letter,
    pub exp: i64,
}

/// A reduced word: nonzero exponents, adjacent blocks in different letters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(Vec<Block>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.iter().any(|b| b.exp == 0) {
            return Err(LabError::Invalid("word has a zero exponent".into()));
        }
        if blocks.windows(2).any(|w| w[0].letter == w[1].letter) {
            return Err(LabError::Invalid("word is not reduced".into()));
        }
        Ok(Word(blocks))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drop a trailing G-block. G fixes `(0, 1)`, so the second column only
    /// determines a word up to this block.
    pub fn canonical(&self) -> Word {
        let mut v = self.0.clone();
        if v.last().is_some_and(|b| b.letter == Letter::G) {
            v.pop();
        }
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|b| format!("{:?}^{}", b.letter, b.exp)).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Word {
    type Err = LabError;

    /// Parses `e` or whitespace-separated blocks like `G^2 H^-1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Word::empty());
        }
        let bad = || LabError::Invalid(format!("cannot parse word '{s}'"));
        let mut blocks = Vec::new();
        for tok in s.split_whitespace() {
            let (l, e) = tok.split_at(1);
            let letter = match l {
                "G" | "g" => Letter::G,
                "H" | "h" => Letter::H,
                _ => return Err(bad()),
            };
            let exp: i64 = if e.is_empty() { 1 } else { e.trim_start_matches('^').parse().map_err(|_| bad())? };
            blocks.push(Block { letter, exp });
        }
        Word::new(blocks)
    }
}

fn check_params(s: &GaussInt, t: &GaussInt) -> Result<()> {
    let four = BigInt::from(4);
    if s.norm() < four || t.norm() < four {
        return Err(LabError::ParamTooSmall);
    }
    Ok(())
}

/// `G^n = (1 0 | ns 1)` or `H^n = (1 nt | 0 1)`.
pub fn block_matrix(b: Block, s: &GaussInt, t: &GaussInt) -> Mat2Z {
    let n = BigInt::from(b.exp);
    let mut m = Mat2Z::identity();
    match b.letter {
        Letter::G => m.c = s.scale(&n),
        Letter::H => m.b = t.scale(&n),
    }
    m
}

/// Exact product of the word's blocks, left to right.
pub fn eval_word(word: &Word, s: &GaussInt, t: &GaussInt) -> Result<Mat2Z> {
    check_params(s, t)?;
    Ok(eval_unchecked(word.blocks(), s, t))
}

fn eval_unchecked(blocks: &[Block], s: &GaussInt, t: &GaussInt) -> Mat2Z {
    blocks.iter().fold(Mat2Z::identity(), |acc, &b| acc.mul(&block_matrix(b, s, t)))
}

/// Result of an exhaustive ping-pong search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PingPongReport {
    pub words: usize,
    /// Nonempty words evaluating to a scalar matrix.
    pub violations: Vec<Word>,
    /// Pairs of distinct words with equal matrices.
    pub collisions: usize,
    /// Minimum over nonempty words of `max(|b|, |c|)`.
    pub min_offdiag: f64,
}

/// All reduced words with at most `max_blocks` blocks and exponents in
/// `[-max_exp, max_exp] \ {0}`, in depth-first order.
pub fn enumerate_words(max_blocks: usize, max_exp: i64) -> Vec<Word> {
    let exps: Vec<i64> = (-max_exp..=max_exp).filter(|&e| e != 0).collect();
    let mut out = vec![Word::empty()];
    if max_blocks == 0 {
        return out;
    }
    let firsts: Vec<Block> = [Letter::G, Letter::H]
        .into_iter()
        .flat_map(|l| exps.iter().map(move |&e| Block { letter: l, exp: e }))
        .collect();
    let parts = par::map_slice(&firsts, |&b| {
        let mut acc = Vec::new();
        let mut stack = vec![b];
        extend_words(&mut stack, max_blocks, &exps, &mut acc);
        acc
    });
    out.extend(parts.into_iter().flatten());
    out
}

fn extend_words(stack: &mut Vec<Block>, max_blocks: usize, exps: &[i64], acc: &mut Vec<Word>) {
    acc.push(Word(stack.clone()));
    if stack.len() == max_blocks {
        return;
    }
    let next = stack.last().expect("nonempty").letter.other();
    for &e in exps {
        stack.push(Block { letter: next, exp: e });
        extend_words(stack, max_blocks, exps, acc);
        stack.pop();
    }
}

/// Search every word within the bounds for scalar matrices and collisions.
pub fn verify_ping_pong(s: &GaussInt, t: &GaussInt, max_blocks: usize, max_exp: i64) -> Result<PingPongReport> {
    check_params(s, t)?;
    let words = enumerate_words(max_blocks, max_exp);
    let mats = par::map_slice(&words, |w| eval_unchecked(w.blocks(), s, t));
    let mut violations = Vec::new();
    let mut min_offdiag = f64::INFINITY;
    let mut seen = HashSet::with_capacity(mats.len());
    let mut collisions = 0;
    for (w, m) in words.iter().zip(&mats) {
        if !seen.insert(m) {
            collisions += 1;
        }
        if w.is_empty() {
            continue;
        }
        if m.is_scalar() {
            violations.push(w.clone());
        }
        min_offdiag = min_offdiag.min(m.b.abs_f64().max(m.c.abs_f64()));
    }
    Ok(PingPongReport { words: words.len(), violations, collisions, min_offdiag })
}

/// floor(Re(x / z)) for nonzero z, exactly.
fn floor_re_quotient(x: &GaussInt, z: &GaussInt) -> BigInt {
    let num = (x * &z.conj()).re;
    num.div_floor(&z.norm())
}

/// Strip one block `L^m` from the left of `(x, y)`; `big` is the larger
/// coordinate, `small` the other, `step` the letter parameter.
fn peel(big: &GaussInt, small: &GaussInt, step: &GaussInt) -> Option<(BigInt, GaussInt)> {
    let unit = step * small;
    let m0 = floor_re_quotient(big, &unit);
    let bound = small.norm();
    for m in [m0.clone(), m0 + 1] {
        if m.is_zero() {
            continue;
        }
        let rest = big - &unit.scale(&m);
        if rest.norm() < bound {
            return Some((m, rest));
        }
    }
    None
}

/// Recover the canonical word (no trailing G) with second column `(b, d)`
/// by greedy norm descent.
pub fn reconstruct_from_column(
    b: &GaussInt,
    d: &GaussInt,
    s: &GaussInt,
    t: &GaussInt,
    max_blocks: usize,
) -> Result<Word> {
    check_params(s, t)?;
    let (mut x, mut y) = (b.clone(), d.clone());
    let mut blocks = Vec::new();
    loop {
        if x.is_zero() && y == GaussInt::one() {
            break;
        }
        if blocks.len() == max_blocks {
            return Err(LabError::NotFound);
        }
        let (nx, ny) = (x.norm(), y.norm());
        if nx > ny {
            let (m, rest) = peel(&x, &y, t).ok_or(LabError::NotFound)?;
            blocks.push(Block { letter: Letter::H, exp: m.to_i64().ok_or(LabError::NotFound)? });
            x = rest;
        } else if ny > nx && !x.is_zero() {
            let (n, rest) = peel(&y, &x, s).ok_or(LabError::NotFound)?;
            blocks.push(Block { letter: Letter::G, exp: n.to_i64().ok_or(LabError::NotFound)? });
            y = rest;
        } else {
            return Err(LabError::NotFound);
        }
    }
    Word::new(blocks)
}

/// Blind search: every canonical word within the bounds whose second column
/// is `(b, d)`.
pub fn reconstruct_blind(
    b: &GaussInt,
    d: &GaussInt,
    s: &GaussInt,
    t: &GaussInt,
    max_blocks: usize,
    max_exp: i64,
) -> Result<Vec<Word>> {
    check_params(s, t)?;
    let words = enumerate_words(max_blocks, max_exp);
    let hits = par::map_slice(&words, |w| {
        let can = w.canonical();
        if can != *w {
            return None;
        }
        let m = eval_unchecked(w.blocks(), s, t);
        (m.b == *b && m.d == *d).then_some(can)
    });
    Ok(hits.into_iter().flatten().collect())
}

/// `|z|` comparison helper used by the region test: `|x| > |y|`.
pub fn in_region_b(x: &GaussInt, y: &GaussInt) -> bool {
    x.norm() > y.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gi(re: i64, im: i64) -> GaussInt {
        GaussInt::new(re, im)
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn eval_examples() {
        let two = gi(2, 0);
        assert_eq!(eval_word(&Word::empty(), &two, &two).unwrap(), Mat2Z::identity());
        let m = eval_word(&w("G^1 H^1"), &two, &two).unwrap();
        assert_eq!(m, Mat2Z { a: gi(1, 0), b: gi(2, 0), c: gi(2, 0), d: gi(5, 0) });
        // G^2 H^-1 with s=2, t=2+i: (1 0|4 1)(1 -2-i|0 1)
        let m = eval_word(&w("G^2 H^-1"), &two, &gi(2, 1)).unwrap();
        assert_eq!(m, Mat2Z { a: gi(1, 0), b: gi(-2, -1), c: gi(4, 0), d: gi(-7, -4) });
        assert_eq!(m.det(), GaussInt::one());
        assert_eq!(eval_word(&w("G"), &gi(1, 0), &two), Err(LabError::ParamTooSmall));
    }

    #[test]
    fn word_validation() {
        assert!("G^1 G^2".parse::<Word>().is_err());
        assert!("H^0".parse::<Word>().is_err());
        let x = w("G^2 H^-3 G^1");
        assert_eq!(x.to_string().parse::<Word>().unwrap(), x);
        assert_eq!(x.canonical(), w("G^2 H^-3"));
    }

    #[test]
    fn ping_pong_searches() {
        let r = verify_ping_pong(&gi(2, 0), &gi(2, 0), 4, 3).unwrap();
        assert_eq!(r.words, 1 + 2 * (6 + 36 + 216 + 1296));
        assert!(r.violations.is_empty());
        assert_eq!(r.collisions, 0);
        assert!(r.min_offdiag >= 2.0);
        let r = verify_ping_pong(&gi(0, 2), &gi(0, 2), 3, 2).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.collisions, 0);
        assert_eq!(verify_ping_pong(&gi(1, 0), &gi(2, 0), 2, 2).unwrap_err(), LabError::ParamTooSmall);
    }

    #[test]
    fn reconstruct_examples() {
        let two = gi(2, 0);
        assert_eq!(reconstruct_from_column(&gi(0, 0), &gi(1, 0), &two, &two, 6).unwrap(), Word::empty());
        assert_eq!(reconstruct_from_column(&gi(2, 0), &gi(5, 0), &two, &two, 6).unwrap(), w("G^1 H^1"));
        assert_eq!(reconstruct_from_column(&gi(3, 0), &gi(3, 0), &two, &two, 6), Err(LabError::NotFound));
    }

    #[test]
    fn greedy_matches_blind_search() {
        let cases = [(gi(2, 0), gi(2, 0)), (gi(0, 2), gi(0, 2)), (gi(2, 1), gi(3, 0))];
        for (s, t) in cases {
            for word in enumerate_words(3, 2) {
                let m = eval_unchecked(word.blocks(), &s, &t);
                let blind = reconstruct_blind(&m.b, &m.d, &s, &t, 3, 2).unwrap();
                assert_eq!(blind, vec![word.canonical()], "word {word}");
                let greedy = reconstruct_from_column(&m.b, &m.d, &s, &t, 3).unwrap();
                assert_eq!(greedy, word.canonical());
            }
        }
    }

    #[test]
    fn region_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = gi(2, 0);
        let mut checked = 0;
        while checked < 1000 {
            let x = gi(rng.gen_range(-50..=50), rng.gen_range(-50..=50));
            let y = gi(rng.gen_range(-50..=50), rng.gen_range(-50..=50));
            if !in_region_b(&x, &y) {
                continue;
            }
            let n = BigInt::from(*[-3i64, -2, -1, 1, 2, 3].get(rng.gen_range(0..6)).unwrap());
            // G^n (x, y) = (x, y + n s x)
            let y2 = &y + &(&s.scale(&n) * &x);
            assert!(y2.norm() > x.norm());
            checked += 1;
        }
    }

    fn arb_word() -> impl Strategy<Value = Word> {
        (any::<bool>(), prop::collection::vec((1i64..=4, any::<bool>()), 0..=5)).prop_map(|(start_g, es)| {
            let mut letter = if start_g { Letter::G } else { Letter::H };
            let mut blocks = Vec::new();
            for (e, neg) in es {
                blocks.push(Block { letter, exp: if neg { -e } else { e } });
                letter = letter.other();
            }
            Word::new(blocks).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn round_trip_real(word in arb_word()) {
            let two = gi(2, 0);
            let m = eval_word(&word, &two, &two).unwrap();
            let back = reconstruct_from_column(&m.b, &m.d, &two, &two, 5).unwrap();
            prop_assert_eq!(back, word.canonical());
        }

        #[test]
        fn round_trip_gaussian(word in arb_word()) {
            let s = gi(0, 2);
            let m = eval_word(&word, &s, &s).unwrap();
            let back = reconstruct_from_column(&m.b, &m.d, &s, &s, 5).unwrap();
            prop_assert_eq!(back, word.canonical());
        }
    }
}
