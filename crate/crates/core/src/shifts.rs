//! Multiplicative subgroups of F_p^*, their shifted intersections
//! `(a_1 Γ + b_1) ∩ ... ∩ (a_k Γ + b_k)`, the Moebius transport identity, and
//! the constructive shrinking iteration.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, Fp};
use crate::par;
use crate::sets::PointSet;
use crate::sl2::{Mat2, ProjPoint};

/// Largest prime handled by this module.
pub const MAX_SHIFT_PRIME: u64 = 1 << 24;

/// The subgroup of F_p^* of order `d`.
#[derive(Clone, Debug)]
pub struct Subgroup {
    p: u64,
    generator: Fp,
    members: FixedBitSet,
    elements: Vec<Fp>,
}

impl Subgroup {
    pub fn new(f: &FieldCtx, d: u64) -> Result<Self> {
        let p = f.p();
        if p > MAX_SHIFT_PRIME {
            return Err(LabError::Invalid(format!("prime {p} exceeds the shift-module cap 2^24")));
        }
        if d == 0 || !(p - 1).is_multiple_of(d) {
            return Err(LabError::BadOrder(d));
        }
        let generator = f.pow(f.primitive_root(), (p - 1) / d);
        let mut members = FixedBitSet::with_capacity(p as usize);
        let mut x = f.one();
        for _ in 0..d {
            members.insert(x.value() as usize);
            x = f.mul(x, generator);
        }
        let elements = members.ones().map(|i| Fp::from_reduced(i as u64)).collect();
        Ok(Subgroup { p, generator, members, elements })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generator(&self) -> Fp {
        self.generator
    }

    /// Elements in increasing order.
    pub fn elements(&self) -> &[Fp] {
        &self.elements
    }

    #[inline]
    pub fn contains(&self, x: Fp) -> bool {
        self.members.contains(x.value() as usize)
    }

    /// `-1 ∈ Γ`.
    pub fn is_symmetric(&self) -> bool {
        self.members.contains(self.p as usize - 1)
    }

    pub fn as_set(&self) -> PointSet {
        PointSet::from_bits(self.members.clone())
    }

    /// Smallest element of the coset `alpha Γ`, used as a canonical label.
    pub fn coset_rep(&self, f: &FieldCtx, alpha: Fp) -> Fp {
        self.elements.iter().map(|&g| f.mul(alpha, g)).min().expect("nonempty")
    }
}

/// One component `alpha Γ + beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Component {
    pub alpha: Fp,
    pub beta: Fp,
}

/// The vectors `(alpha, beta)` of a shifted intersection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShiftSpec {
    comps: Vec<Component>,
}

impl ShiftSpec {
    pub fn new(alphas: &[Fp], betas: &[Fp]) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != betas.len() {
            return Err(LabError::Invalid("shift spec needs k >= 1 matching alphas and betas".into()));
        }
        if alphas.iter().any(|a| a.is_zero()) {
            return Err(LabError::Invalid("alpha coefficients must be nonzero".into()));
        }
        let comps = alphas.iter().zip(betas).map(|(&alpha, &beta)| Component { alpha, beta }).collect();
        Ok(ShiftSpec { comps })
    }

    pub fn from_components(comps: Vec<Component>) -> Result<Self> {
        let (a, b): (Vec<Fp>, Vec<Fp>) = comps.iter().map(|c| (c.alpha, c.beta)).unzip();
        Self::new(&a, &b)
    }

    /// `Γ_T = ∩_{t ∈ T} (Γ - t)`.
    pub fn from_shifts(f: &FieldCtx, shifts: &[Fp]) -> Result<Self> {
        let alphas = vec![f.one(); shifts.len()];
        let betas: Vec<Fp> = shifts.iter().map(|&t| f.neg(t)).collect();
        Self::new(&alphas, &betas)
    }

    pub fn components(&self) -> &[Component] {
        &self.comps
    }

    pub fn k(&self) -> usize {
        self.comps.len()
    }

    pub fn alphas(&self) -> Vec<Fp> {
        self.comps.iter().map(|c| c.alpha).collect()
    }

    pub fn betas(&self) -> Vec<Fp> {
        self.comps.iter().map(|c| c.beta).collect()
    }
}

/// `alpha Γ + beta` as a bitset.
fn component_bits(f: &FieldCtx, gamma: &Subgroup, c: Component) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(f.p() as usize);
    for &g in gamma.elements() {
        bits.insert(f.add(f.mul(c.alpha, g), c.beta).value() as usize);
    }
    bits
}

/// The exact set `∩_j (alpha_j Γ + beta_j)`.
pub fn shifted_intersection(f: &FieldCtx, gamma: &Subgroup, spec: &ShiftSpec) -> PointSet {
    let mut acc = component_bits(f, gamma, spec.comps[0]);
    for &c in &spec.comps[1..] {
        acc.intersect_with(&component_bits(f, gamma, c));
    }
    PointSet::from_bits(acc)
}

/// Image of a shifted intersection under `g` whose pole sits at the first
/// shift: `g Γ_{α;β} = Γ_{γ; g(∞), g(β_2), ..., g(β_k)}`.
pub fn transport(f: &FieldCtx, g: &Mat2, gamma: &Subgroup, spec: &ShiftSpec) -> Result<ShiftSpec> {
    if g.is_borel() {
        return Err(LabError::BorelElement);
    }
    let (a, c, d, det) = (g.a, g.c, g.d, g.det());
    let first = spec.comps[0];
    if g.pole(f) != ProjPoint::Finite(first.beta) {
        return Err(LabError::PoleMismatch);
    }
    let mut out = Vec::with_capacity(spec.k());
    // γ_1 = -det / (c^2 α_1), new shift a/c
    let g1 = f.neg(f.div(det, f.mul(f.mul(c, c), first.alpha))?);
    out.push(Component { alpha: g1, beta: f.div(a, c)? });
    for comp in &spec.comps[1..] {
        let den = f.add(f.mul(c, comp.beta), d);
        if den.is_zero() {
            return Err(LabError::DegenerateShift(comp.beta.value()));
        }
        // γ_j = α_j det / (α_1 c (c β_j + d))
        let gj = f.div(f.mul(comp.alpha, det), f.mul(f.mul(first.alpha, c), den))?;
        let shift = g.mobius_finite(f, comp.beta).expect("den != 0");
        out.push(Component { alpha: gj, beta: shift });
    }
    let res = ShiftSpec { comps: out };
    debug_assert!(image_matches(f, g, gamma, spec, &res), "transport identity failed");
    Ok(res)
}

fn image_matches(f: &FieldCtx, g: &Mat2, gamma: &Subgroup, from: &ShiftSpec, to: &ShiftSpec) -> bool {
    let src = shifted_intersection(f, gamma, from);
    let image = PointSet::from_elems(f.p(), src.iter().filter_map(|x| g.mobius_finite(f, x)));
    // every source point avoids the pole, so nothing is lost
    image.len() == src.len() && image == shifted_intersection(f, gamma, to)
}

/// Transport and confirm `g(Γ_{α;β}) = Γ_{γ;...}` elementwise.
pub fn verify_transport(f: &FieldCtx, g: &Mat2, gamma: &Subgroup, spec: &ShiftSpec) -> Result<(ShiftSpec, bool)> {
    let out = transport(f, g, gamma, spec)?;
    let ok = image_matches(f, g, gamma, spec, &out);
    Ok((out, ok))
}

/// A random spec with distinct shifts and a random `g ∈ SL_2` whose pole is
/// the first shift, so that [`transport`] applies.
pub fn random_transport_instance<R: rand::Rng>(f: &FieldCtx, k: usize, rng: &mut R) -> (Mat2, ShiftSpec) {
    let p = f.p();
    assert!(k >= 1 && (k as u64) <= p, "need 1 <= k <= p");
    let alphas: Vec<Fp> = (0..k).map(|_| f.from_u64(rng.gen_range(1..p))).collect();
    let betas: Vec<Fp> =
        rand::seq::index::sample(rng, p as usize, k).into_iter().map(|i| f.from_u64(i as u64)).collect();
    let c = f.from_u64(rng.gen_range(1..p));
    let a = f.from_u64(rng.gen_range(0..p));
    // pole -d/c = beta_1, det = ad - bc = 1
    let d = f.neg(f.mul(c, betas[0]));
    let b = f.div(f.sub(f.mul(a, d), f.one()), c).expect("c != 0");
    let g = Mat2::new(f, a, b, c, d).expect("det 1");
    (g, ShiftSpec::new(&alphas, &betas).expect("alphas nonzero"))
}

/// `Γ_{s} = Γ ∩ (Γ - s_1) ∩ ... ∩ (Γ - s_k)`.
pub fn gamma_shifts(f: &FieldCtx, gamma: &Subgroup, shifts: &[Fp]) -> PointSet {
    let mut all = vec![f.zero()];
    all.extend_from_slice(shifts);
    shifted_intersection(f, gamma, &ShiftSpec::from_shifts(f, &all).expect("k >= 1"))
}

/// Is `{x^{-1} : x ∈ Γ_s} = Γ_{s^{-1}}`? Requires every shift in Γ.
pub fn inverse_identity_check(f: &FieldCtx, gamma: &Subgroup, shifts: &[Fp]) -> Result<bool> {
    for &s in shifts {
        if s.is_zero() {
            return Err(LabError::ZeroShift);
        }
        if !gamma.contains(s) {
            return Err(LabError::ShiftNotInSubgroup(s.value()));
        }
    }
    let lhs = gamma_shifts(f, gamma, shifts);
    let inv_lhs = PointSet::from_elems(f.p(), lhs.iter().map(|x| f.inv(x).expect("0 ∉ Γ")));
    let inv_shifts: Vec<Fp> = shifts.iter().map(|&s| f.inv(s).expect("nonzero")).collect();
    Ok(inv_lhs == gamma_shifts(f, gamma, &inv_shifts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeilReport {
    pub size: usize,
    pub bound: f64,
    pub ok: bool,
}

/// `|R ∩ (R - s_1) ∩ ... ∩ (R - s_k)|` against `p/2^{k+1} + k sqrt(p)`.
pub fn weil_bound_check(f: &FieldCtx, shifts: &[Fp]) -> Result<WeilReport> {
    for (i, &s) in shifts.iter().enumerate() {
        if s.is_zero() {
            return Err(LabError::ZeroShift);
        }
        if shifts[..i].contains(&s) {
            return Err(LabError::DuplicateShifts);
        }
    }
    let k = shifts.len();
    let p = f.p();
    // residues in shifted position: x, x + s_1, ... all squares
    let size = (1..p)
        .filter(|&x| {
            let x = f.from_u64(x);
            f.legendre(x) == 1 && shifts.iter().all(|&s| f.legendre(f.add(x, s)) == 1)
        })
        .count();
    let bound = p as f64 / 2f64.powi(k as i32 + 1) + k as f64 * (p as f64).sqrt();
    Ok(WeilReport { size, bound, ok: size as f64 <= bound })
}

/// `{x + s : x ∈ X}`.
pub fn translate(f: &FieldCtx, x: &PointSet, s: Fp) -> PointSet {
    PointSet::from_elems(f.p(), x.iter().map(|v| f.add(v, s)))
}

/// `g(X)` with the pole image dropped.
pub fn image(f: &FieldCtx, g: &Mat2, x: &PointSet) -> PointSet {
    PointSet::from_elems(f.p(), x.iter().filter_map(|v| g.mobius_finite(f, v)))
}

fn intersect(a: &PointSet, b: &PointSet) -> PointSet {
    let mut bits = a.bits().clone();
    bits.intersect_with(b.bits());
    PointSet::from_bits(bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShrinkRatios {
    /// `|X ∩ (X + s)| / |X|`
    pub translate: f64,
    /// `|g(X) ∩ (g(X) + s^{-1})| / |X|`
    pub mapped: f64,
    /// `|X| > 3p/4`, outside the regime where shrinking is expected.
    pub large_set: bool,
}

pub fn shrink_step(f: &FieldCtx, x: &PointSet, g: &Mat2, s: Fp) -> Result<ShrinkRatios> {
    if s.is_zero() {
        return Err(LabError::ZeroShift);
    }
    if x.is_empty() {
        return Err(LabError::EmptyIntersection);
    }
    let n = x.len() as f64;
    let t = intersect(x, &translate(f, x, s)).len() as f64 / n;
    let y = image(f, g, x);
    let m = intersect(&y, &translate(f, &y, f.inv(s)?)).len() as f64 / n;
    Ok(ShrinkRatios { translate: t, mapped: m, large_set: 4 * x.len() > 3 * f.p() as usize })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    /// `X ∩ (X - x)`
    Translate,
    /// `X' ∩ w_x X'` with `X' = X ∩ (Γ + x)` and `w_x = (1 0 | -1/x 1)`
    Weyl,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkStepRecord {
    pub step: usize,
    #[serde(rename = "move")]
    pub mv: Move,
    pub x: u64,
    /// `(alpha, beta)` pairs, canonical coset labels for alpha. Includes
    /// the component `Γ` itself.
    pub spec: Vec<(u64, u64)>,
    pub size: usize,
    pub t_size: usize,
    pub ratio: f64,
    /// Ratio of the move not taken.
    pub other_ratio: f64,
    /// How many candidate `x` were tried before one made progress.
    pub candidates_tried: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZScan {
    pub n: u64,
    pub best_z: u64,
    pub best_ratio: f64,
    /// `(z, |X ∩ g^{u_z} X| / |X|)` for each `z ∈ 2·[N]`.
    pub ratios: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkTrace {
    /// Labelled as one realization: greedy minimum-ratio move, smallest `x`.
    pub rule: &'static str,
    pub initial_size: usize,
    pub initial_t: usize,
    pub steps: Vec<ShrinkStepRecord>,
    /// Why the iteration stopped before `n` steps, if it did.
    pub stopped: Option<String>,
    /// `|T_i| <= 2^i |S| + i` at every recorded step.
    pub bookkeeping_ok: bool,
    /// Product of realized per-step ratios.
    pub ratio_product: f64,
    pub z_scan: Option<ZScan>,
}

#[derive(Clone, Copy, Debug)]
pub struct ShrinkOptions {
    pub steps: usize,
    /// Scan `z ∈ 2·[N]` when nonzero.
    pub n_scan: u64,
    /// Refuse subgroups without -1.
    pub require_symmetric: bool,
}

struct State {
    comps: Vec<Component>,
    set: PointSet,
}

fn canonical(f: &FieldCtx, gamma: &Subgroup, comps: Vec<Component>) -> Vec<Component> {
    let mut out: Vec<Component> =
        comps.into_iter().map(|c| Component { alpha: gamma.coset_rep(f, c.alpha), beta: c.beta }).collect();
    out.sort();
    out.dedup();
    out
}

/// Greedy constructive shrinking of `Γ_S`.
pub fn constructive_shrink(f: &FieldCtx, gamma: &Subgroup, s: &[Fp], opts: &ShrinkOptions) -> Result<ShrinkTrace> {
    if opts.require_symmetric && !gamma.is_symmetric() {
        return Err(LabError::SymmetryRequired);
    }
    // Γ_S = Γ ∩ ∩_{s ∈ S} (Γ - s): the shift 0 is always present and is
    // counted in |T| like any other component
    let mut with_zero = vec![f.zero()];
    with_zero.extend_from_slice(s);
    let spec0 = ShiftSpec::from_shifts(f, &with_zero)?;
    let mut st = State { comps: canonical(f, gamma, spec0.comps.clone()), set: shifted_intersection(f, gamma, &spec0) };
    if st.set.is_empty() {
        return Err(LabError::EmptyIntersection);
    }
    let mut trace = ShrinkTrace {
        rule: "greedy-min-ratio/smallest-x",
        initial_size: st.set.len(),
        initial_t: st.comps.len(),
        steps: Vec::new(),
        stopped: None,
        bookkeeping_ok: true,
        ratio_product: 1.0,
        z_scan: None,
    };
    let s_len = st.comps.len() as f64;
    for step in 1..=opts.steps {
        if st.set.len() <= 1 {
            trace.stopped = Some(format!("set size {} at step {step}", st.set.len()));
            break;
        }
        let base = st.set.len() as f64;
        let mut chosen = None;
        for (tried, x) in st.set.iter().enumerate() {
            let tr = translate_move(f, gamma, &st, x)?;
            let wy = weyl_move(f, gamma, &st, x)?;
            let (rt, rw) = (tr.set.len() as f64 / base, wy.set.len() as f64 / base);
            // a move must shrink the set without emptying it
            let ok = |st: &State, r: f64| r < 1.0 && !st.set.is_empty();
            chosen = match (ok(&tr, rt), ok(&wy, rw)) {
                (false, false) => continue,
                (true, false) => Some((Move::Translate, x, tr, rt, rw, tried + 1)),
                (false, true) => Some((Move::Weyl, x, wy, rw, rt, tried + 1)),
                (true, true) if rt <= rw => Some((Move::Translate, x, tr, rt, rw, tried + 1)),
                (true, true) => Some((Move::Weyl, x, wy, rw, rt, tried + 1)),
            };
            break;
        }
        let Some((mv, x, next, ratio, other, tried)) = chosen else {
            trace.stopped = Some(format!("no candidate shrank the set at step {step}"));
            break;
        };
        st = next;
        trace.ratio_product *= ratio;
        let t_size = st.comps.len();
        if t_size as f64 > 2f64.powi(step as i32) * s_len + step as f64 {
            trace.bookkeeping_ok = false;
        }
        trace.steps.push(ShrinkStepRecord {
            step,
            mv,
            x: x.value(),
            spec: st.comps.iter().map(|c| (c.alpha.value(), c.beta.value())).collect(),
            size: st.set.len(),
            t_size,
            ratio,
            other_ratio: other,
            candidates_tried: tried,
        });
        if st.set.is_empty() {
            trace.stopped = Some(format!("intersection empty after step {step}"));
            break;
        }
    }
    if opts.n_scan > 0 {
        trace.z_scan = Some(z_scan(f, &shifted_intersection(f, gamma, &spec0), opts.n_scan)?);
    }
    Ok(trace)
}

fn translate_move(f: &FieldCtx, gamma: &Subgroup, st: &State, x: Fp) -> Result<State> {
    // Γ_T ∩ (Γ_T - x) = Γ_{T ∪ (T + x)}
    let mut comps = st.comps.clone();
    comps.extend(st.comps.iter().map(|c| Component { alpha: c.alpha, beta: f.sub(c.beta, x) }));
    let set = intersect(&st.set, &translate(f, &st.set, f.neg(x)));
    let comps = canonical(f, gamma, comps);
    debug_assert_eq!(set, shifted_intersection(f, gamma, &ShiftSpec { comps: comps.clone() }));
    Ok(State { comps, set })
}

fn weyl_move(f: &FieldCtx, gamma: &Subgroup, st: &State, x: Fp) -> Result<State> {
    let w = Mat2::new(f, f.one(), f.zero(), f.neg(f.inv(x)?), f.one())?;
    // pole of w_x is x: prepend the component Γ + x
    let pole = Component { alpha: f.one(), beta: x };
    let mut bar = vec![pole];
    bar.extend(st.comps.iter().copied().filter(|c| *c != pole));
    let bar_spec = ShiftSpec { comps: bar.clone() };
    let bar_set = intersect(&st.set, &component_set(f, gamma, pole));
    let moved = match transport(f, &w, gamma, &bar_spec) {
        Ok(m) => m,
        // another component shares the pole with a different coset, so X' is empty
        Err(LabError::DegenerateShift(_)) => {
            return Ok(State { comps: canonical(f, gamma, bar), set: PointSet::empty(f.p()) });
        }
        Err(e) => return Err(e),
    };
    let mut comps = bar;
    comps.extend(moved.comps.iter().copied());
    let set = intersect(&bar_set, &image(f, &w, &bar_set));
    let comps = canonical(f, gamma, comps);
    debug_assert_eq!(set, shifted_intersection(f, gamma, &ShiftSpec { comps: comps.clone() }));
    Ok(State { comps, set })
}

fn component_set(f: &FieldCtx, gamma: &Subgroup, c: Component) -> PointSet {
    PointSet::from_bits(component_bits(f, gamma, c))
}

/// `|X ∩ g^{u_z} X| / |X|` for `g x = 1/x` and every `z ∈ 2·[N]`; ties in the
/// argmin go to the smallest `z`.
pub fn z_scan(f: &FieldCtx, x: &PointSet, n: u64) -> Result<ZScan> {
    if x.is_empty() {
        return Err(LabError::EmptyIntersection);
    }
    let base = x.len() as f64;
    let ratios: Vec<(u64, f64)> = par::map_range(n as usize, |j| {
        let z = f.from_u64(2 * (j as u64 + 1));
        // g^{u_z} = (-z, 1 - z^2 | 1, z)
        let g = Mat2::new(f, f.neg(z), f.sub(f.one(), f.mul(z, z)), f.one(), z).expect("det = -1");
        (z.value(), intersect(x, &image(f, &g, x)).len() as f64 / base)
    });
    let (best_z, best_ratio) =
        ratios.iter().fold((0, f64::INFINITY), |acc, &(z, r)| if r < acc.1 { (z, r) } else { acc });
    Ok(ZScan { n, best_z, best_ratio, ratios })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyScan {
    /// `|X ∩ (X+2) ∩ ... ∩ (X+2N)| / |X|`
    pub ratio_x: f64,
    /// Same for `Y = g(X)`, still divided by `|X|`.
    pub ratio_y: f64,
    pub first_holds: bool,
    pub second_holds: bool,
}

pub fn shift_family_scan(f: &FieldCtx, x: &PointSet, g: &Mat2, n: u64, eps: f64) -> Result<FamilyScan> {
    if n == 0 || !(eps > 0.0 && eps <= 0.5) {
        return Err(LabError::Invalid("need N >= 1 and eps in (0, 1/2]".into()));
    }
    if x.is_empty() {
        return Err(LabError::EmptyIntersection);
    }
    let iterated = |s: &PointSet| {
        let mut acc = s.clone();
        for j in 1..=n {
            acc = intersect(&acc, &translate(f, s, f.from_u64(2 * j)));
        }
        acc.len() as f64 / x.len() as f64
    };
    let ratio_x = iterated(x);
    let ratio_y = iterated(&image(f, g, x));
    let cut = 0.5 + eps;
    Ok(FamilyScan { ratio_x, ratio_y, first_holds: ratio_x <= cut, second_holds: ratio_y <= cut })
}
