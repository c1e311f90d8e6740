//! One subcommand per experiment. Each returns its rows; `main` writes them.

use clap::{Args, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sl2lab::cayley::{
    build_generator_set_bg, second_eigenvalue, second_singular_value, symmetrize, CayleyGraph, SpectralMethod,
    SpectralOptions,
};
use sl2lab::field::{distinct_prime_factors, primes_up_to};
use sl2lab::incidence::{
    additive_energy, budget_from_env, build_h_set, cont2_bound_shape, count_bg_general, count_bg_prime, count_bg_words,
    count_cont2_energy, count_fq_system, count_mobius_incidences, count_union_structured, image_size_cont2,
    incidence_bound_shape, product_multiplicity, ratio_string, subgroup_mass, CountReport, SFamily, SubgroupSpec,
    UnionBlock,
};
use sl2lab::markov::{mix_profile, ChainSpec, EvolveMode, Laziness};
use sl2lab::qr::{gap_scan, qr_gap, ratio_set_count, residue_run_inclusion_check};
use sl2lab::sets::{PointSet, SetSpec};
use sl2lab::shifts::{
    constructive_shrink, random_transport_instance, shifted_intersection, verify_transport, weil_bound_check,
    ShiftSpec, ShrinkOptions, Subgroup,
};
use sl2lab::sl2::Sl2Group;
use sl2lab::words::{eval_word, reconstruct_from_column, verify_ping_pong, Word};
use sl2lab::{FieldCtx, FqCtx, LabError, Mat2, ProjPoint, Result};

use crate::output::Record;
use crate::parse;

#[derive(Subcommand, Debug, Clone)]
pub enum Experiment {
    /// Second eigenvalue and girth of Cay(SL2(F_p), gens)
    Expander(ExpanderArgs),
    /// Girth of a Cayley graph on SL2(F_p) or Z/n
    Girth(GirthArgs),
    /// #{(c,a,b) : g(c+a) = c+b} or the general pair-family count, vs |S||A||B|/p
    CountBg(CountBgArgs),
    /// #{(α_0..α_k) ∈ S, a, b : u_{α_k} g_k ... g_1 u_{α_0} a = b}
    CountWords(CountWordsArgs),
    /// Count over a disjoint union of shifted grid blocks and a pair list
    CountUnion(CountUnionArgs),
    /// ‖r‖_∞ and Σ r² for (H H^-1)^l, H = {u_{-β} g u_α}
    ProductStats(ProductArgs),
    /// Mass of (H H^-1)^l on a Borel or dihedral coset
    SubgroupMass(MassArgs),
    /// Solutions of 1/(a+b)+c = 1/(a'+b')+c' and |(A+A)^-1 + A|
    Cont2(Cont2Args),
    /// I(A × B, T) for a set T of Moebius maps
    MobiusInc(MobiusArgs),
    /// #{(a+b)(c+d) = λ} over F_p[i]
    FqSystem(FqArgs),
    /// Total variation profile of the lazy Moebius chain
    Markov(MarkovArgs),
    /// (α_1 Γ + β_1) ∩ ... ∩ (α_k Γ + β_k)
    ShiftIntersect(ShiftArgs),
    /// Moebius image of a shifted intersection, checked elementwise
    TransportVerify(TransportArgs),
    /// |R ∩ (R - s_1) ∩ ... | against p/2^{k+1} + k sqrt(p)
    WeilCheck(WeilArgs),
    /// Greedy constructive shrinking of Γ ∩ ∩(Γ - s)
    Shrink(ShrinkArgs),
    /// Largest cyclic gap between quadratic residues, d / (p^{1/4} log2 p)
    QrGap(QrArgs),
    /// |{y/(a+x) : x ≤ H, y ≤ H_*}| against H_* H
    RatioSet(RatioArgs),
    /// Exhaustive ping-pong search over words in G = u_s, H = u*_t
    Pingpong(PingArgs),
    /// Recover a word from its second column
    Reconstruct(ReconArgs),
}

pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("expander", "λ2 (Lanczos) and girth of Cay(SL2(F_p), {u_{-2j} g u_{2j}})"),
    ("girth", "shortest cycle, or shortest relation for non-symmetric sets"),
    (
        "count-bg",
        "#{(c,a,b) ∈ stride·[N] × A × B : g(c+a) = c+b} vs |A||B|N/p; general pair families via --pairs/--grid",
    ),
    ("count-words", "#{(α_0..α_k) ∈ S, a ∈ A, b ∈ B : u_{α_k} g_k ... g_1 u_{α_0} a = b} vs |S||A||B|/p"),
    ("count-union", "count over S = (⊔ shifted blocks) ⊔ Ω with disjointness check"),
    ("product-stats", "exact ‖r_{(HH^-1)^l}‖_∞ and Σ r² (budget LAB_BUDGET)"),
    ("subgroup-mass", "Σ_{x ∈ g1 B g2 or z C_ε} r_{(HH^-1)^l}(x) and K = |H|^{2l}/mass"),
    ("cont2", "energy of 1/(a+b)+c and |(A+A)^-1 + A| against |A|^{7/5}|B|^{8/5}|C|^{6/5}E+(C)^{1/5}"),
    ("mobius-inc", "I(A × B, T) against |A|^{4/5}|B|^{3/5}|T|^{4/5} + |A|^{6/5}|B|^{7/5}|T|^{1/5} + |T|"),
    ("fq-system", "#{(a+b)(c+d) = λ} over F_p[i] vs |A||B||C||D|/p^2"),
    ("markov", "tv of X -> g(X) ± γ (lazy) to uniform on P^1 and on F_p^*, with log-slope fit"),
    ("shift-intersect", "elements of (α_1 Γ + β_1) ∩ ... ∩ (α_k Γ + β_k)"),
    ("transport-verify", "g Γ_{α;β} = Γ_{γ; g(∞), g(β_2), ...} elementwise, single or random instances"),
    ("weil-check", "|R_{s_1..s_k}| ≤ p/2^{k+1} + k sqrt(p), single or scanned"),
    ("shrink", "greedy translate / Weyl shrinking trace of Γ_S with |T| bookkeeping"),
    ("qr-gap", "d(p) as largest cyclic residue gap, single prime or range"),
    ("ratio-set", "|{y/(a+x)}| ≥ c H_* H under 16 H_*^2 H < p, single or random"),
    ("pingpong", "no word in u_s, u*_t is scalar and no two words collide"),
    ("reconstruct", "word from its second column (b, d) by norm descent"),
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Expander(_) => "expander",
            Experiment::Girth(_) => "girth",
            Experiment::CountBg(_) => "count-bg",
            Experiment::CountWords(_) => "count-words",
            Experiment::CountUnion(_) => "count-union",
            Experiment::ProductStats(_) => "product-stats",
            Experiment::SubgroupMass(_) => "subgroup-mass",
            Experiment::Cont2(_) => "cont2",
            Experiment::MobiusInc(_) => "mobius-inc",
            Experiment::FqSystem(_) => "fq-system",
            Experiment::Markov(_) => "markov",
            Experiment::ShiftIntersect(_) => "shift-intersect",
            Experiment::TransportVerify(_) => "transport-verify",
            Experiment::WeilCheck(_) => "weil-check",
            Experiment::Shrink(_) => "shrink",
            Experiment::QrGap(_) => "qr-gap",
            Experiment::RatioSet(_) => "ratio-set",
            Experiment::Pingpong(_) => "pingpong",
            Experiment::Reconstruct(_) => "reconstruct",
        }
    }

    pub fn run(&self) -> Result<Vec<Record>> {
        let rec = Record::new(self.name());
        match self {
            Experiment::Expander(a) => a.run(rec),
            Experiment::Girth(a) => a.run(rec),
            Experiment::CountBg(a) => a.run(rec),
            Experiment::CountWords(a) => a.run(rec),
            Experiment::CountUnion(a) => a.run(rec),
            Experiment::ProductStats(a) => a.run(rec),
            Experiment::SubgroupMass(a) => a.run(rec),
            Experiment::Cont2(a) => a.run(rec),
            Experiment::MobiusInc(a) => a.run(rec),
            Experiment::FqSystem(a) => a.run(rec),
            Experiment::Markov(a) => a.run(rec),
            Experiment::ShiftIntersect(a) => a.run(rec),
            Experiment::TransportVerify(a) => a.run(rec),
            Experiment::WeilCheck(a) => a.run(rec),
            Experiment::Shrink(a) => a.run(rec),
            Experiment::QrGap(a) => a.run(rec),
            Experiment::RatioSet(a) => a.run(rec),
            Experiment::Pingpong(a) => a.run(rec),
            Experiment::Reconstruct(a) => a.run(rec),
        }
    }
}

fn field(p: u64) -> Result<FieldCtx> {
    FieldCtx::new(p)
}

fn set(f: &FieldCtx, spec: &str) -> Result<PointSet> {
    spec.parse::<SetSpec>()?.build(f)
}

fn count_fields(rec: Record, r: &CountReport) -> Record {
    let rec = rec
        .put("exact_count", r.exact_count)
        .put("main_term", ratio_string(&r.main_term))
        .float("normalized_error", r.normalized_error);
    match r.max_slice {
        Some(m) => rec.put("max_slice", m),
        None => rec,
    }
}

fn family_from_tuples(s: &str, k: usize) -> Result<SFamily> {
    let tuples = parse::tuples(s)?;
    let mut out = Vec::with_capacity(tuples.len());
    for t in tuples {
        if t.iter().any(|&x| x < 1) {
            return Err(LabError::Invalid(format!("family entries must be positive: {t:?}")));
        }
        out.push(t.into_iter().map(|x| x as u64).collect::<Vec<u64>>());
    }
    let box_n = out.iter().flatten().copied().max().unwrap_or(1);
    SFamily::new(box_n, k, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lanczos,
    Power,
}

/// Generator set shared by `expander` and `girth`.
#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long, default_value = "w")]
    g: String,
    #[arg(long = "N", default_value_t = 2)]
    n: u64,
    #[arg(long)]
    symmetrize: bool,
    /// Explicit generators `a,b,c,d;...`, replacing the g/N construction
    #[arg(long)]
    gens: Option<String>,
}

impl GenArgs {
    fn build(&self, f: &FieldCtx) -> Result<Vec<Mat2>> {
        let gens = match &self.gens {
            Some(s) => parse::mats(f, s)?,
            None => build_generator_set_bg(f, &parse::mat(f, &self.g)?, self.n)?,
        };
        Ok(if self.symmetrize { symmetrize(f, &gens) } else { gens })
    }

    fn echo(&self, rec: Record) -> Record {
        match &self.gens {
            Some(s) => rec.put("gens", s.as_str()),
            None => rec.put("g", self.g.as_str()).put("N", self.n),
        }
        .put("symmetrize", self.symmetrize)
    }
}

#[derive(Args, Debug, Clone)]
pub struct ExpanderArgs {
    #[arg(long)]
    prime: u64,
    #[command(flatten)]
    gens: GenArgs,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Method::Lanczos)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the girth BFS
    #[arg(long)]
    no_girth: bool,
}

impl ExpanderArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let gens = self.gens.build(&f)?;
        let graph = CayleyGraph::sl2(&Sl2Group::new(f.clone()), &gens)?;
        let method = match self.method {
            Method::Lanczos => SpectralMethod::Lanczos,
            Method::Power => SpectralMethod::Power,
        };
        let opts = SpectralOptions { tol: self.tol, seed: self.seed, method, ..SpectralOptions::default() };
        let symmetric = graph.is_symmetric();
        let rep = if symmetric { second_eigenvalue(&graph, &opts)? } else { second_singular_value(&graph, &opts)? };
        let rec = self
            .gens
            .echo(rec.put("prime", self.prime))
            .put("generators", gens.len())
            .put("vertices", graph.vertices())
            .put("degree", graph.degree())
            .put("symmetric", symmetric)
            .put("quantity", if symmetric { "eigenvalue" } else { "singular-value" })
            .float("lambda2", rep.lambda2)
            .float("lambda2_signed", rep.lambda2_signed)
            .float("lambda_min", rep.lambda_min)
            .float("two_sided", rep.two_sided)
            .put("iterations", rep.iterations)
            .float("residual", rep.residual)
            .put("converged", rep.converged);
        let rec = if self.no_girth { rec } else { rec.put("girth", graph.girth()?) };
        Ok(vec![rec])
    }
}

#[derive(Args, Debug, Clone)]
pub struct GirthArgs {
    /// SL2(F_p) graph
    #[arg(long, conflicts_with = "cyclic")]
    prime: Option<u64>,
    #[command(flatten)]
    gens: GenArgs,
    /// Cay(Z/n, steps) instead
    #[arg(long, requires = "steps")]
    cyclic: Option<usize>,
    #[arg(long)]
    steps: Option<String>,
}

impl GirthArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let (rec, graph) = match (self.prime, self.cyclic) {
            (Some(p), None) => {
                let f = field(p)?;
                let gens = self.gens.build(&f)?;
                (self.gens.echo(rec.put("prime", p)), CayleyGraph::sl2(&Sl2Group::new(f), &gens)?)
            }
            (None, Some(n)) => {
                let steps = parse::ints(self.steps.as_deref().unwrap_or(""))?;
                let rec = rec.put("cyclic", n).put("steps", self.steps.clone().unwrap_or_default());
                (rec, CayleyGraph::cyclic(n, &steps)?)
            }
            _ => return Err(LabError::Invalid("give --prime or --cyclic".into())),
        };
        let girth = graph.girth()?;
        Ok(vec![rec
            .put("vertices", graph.vertices())
            .put("degree", graph.degree())
            .put("symmetric", graph.is_symmetric())
            .put("girth", girth)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct CountBgArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "w")]
    g: String,
    #[arg(long = "N", default_value_t = 5)]
    n: u64,
    /// c runs over stride·[N]
    #[arg(long, default_value_t = 1)]
    stride: u64,
    #[arg(long, default_value = "qr")]
    a: String,
    #[arg(long, default_value = "qr")]
    b: String,
    /// General family `α,β;...` instead of the diagonal
    #[arg(long, conflicts_with = "grid")]
    pairs: Option<String>,
    /// General family [n] × [n]
    #[arg(long)]
    grid: Option<u64>,
}

impl CountBgArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let g = parse::mat(&f, &self.g)?;
        let (a, b) = (set(&f, &self.a)?, set(&f, &self.b)?);
        let rec =
            rec.put("prime", self.prime).put("g", self.g.as_str()).put("A", self.a.as_str()).put("B", self.b.as_str());
        let (rec, r) = if let Some(s) = &self.pairs {
            let fam = family_from_tuples(s, 1)?;
            (rec.put("family", s.as_str()).put("S_size", fam.len()), count_bg_general(&f, &g, &fam, &a, &b)?)
        } else if let Some(n) = self.grid {
            let fam = SFamily::grid(n, 1, 1)?;
            (rec.put("family", format!("grid:{n}")).put("S_size", fam.len()), count_bg_general(&f, &g, &fam, &a, &b)?)
        } else {
            let rec = rec.put("N", self.n).put("stride", self.stride).put("S_size", self.n);
            (rec, count_bg_prime(&f, &g, self.n, self.stride, &a, &b)?)
        };
        Ok(vec![count_fields(rec.put("A_size", a.len()).put("B_size", b.len()), &r)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct CountWordsArgs {
    #[arg(long)]
    prime: u64,
    /// g_1;...;g_k
    #[arg(long, default_value = "w;w")]
    gs: String,
    /// Tuples `α_0,...,α_k;...`
    #[arg(long, conflicts_with = "grid")]
    tuples: Option<String>,
    /// [n]^{k+1}
    #[arg(long)]
    grid: Option<u64>,
    #[arg(long, default_value = "qr")]
    a: String,
    #[arg(long, default_value = "qr")]
    b: String,
}

impl CountWordsArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let gs = parse::mats(&f, &self.gs)?;
        let k = gs.len();
        let (fam, label) = match (&self.tuples, self.grid) {
            (Some(s), _) => (family_from_tuples(s, k)?, s.clone()),
            (None, Some(n)) => (SFamily::grid(n, k, 1)?, format!("grid:{n}")),
            (None, None) => return Err(LabError::Invalid("give --tuples or --grid".into())),
        };
        let (a, b) = (set(&f, &self.a)?, set(&f, &self.b)?);
        let r = count_bg_words(&f, &gs, &fam, &a, &b)?;
        let rec = rec
            .put("prime", self.prime)
            .put("gs", self.gs.as_str())
            .put("k", k)
            .put("family", label)
            .put("A", self.a.as_str())
            .put("B", self.b.as_str())
            .put("S_size", fam.len())
            .put("A_size", a.len())
            .put("B_size", b.len());
        Ok(vec![count_fields(rec, &r)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct CountUnionArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "w")]
    g: String,
    /// `dx,dy,n`: the block [n]² + (dx, dy); repeatable
    #[arg(long)]
    block: Vec<String>,
    /// Extra pairs `x,y;...`
    #[arg(long, default_value = "")]
    omega: String,
    #[arg(long, default_value = "qr")]
    a: String,
    #[arg(long, default_value = "qr")]
    b: String,
}

impl CountUnionArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let g = parse::mat(&f, &self.g)?;
        let mut blocks = Vec::new();
        for s in &self.block {
            match parse::ints(s)?[..] {
                [dx, dy, n] if n > 0 => {
                    blocks.push(UnionBlock { shift: (dx, dy), family: SFamily::grid(n as u64, 1, 1)? })
                }
                _ => return Err(LabError::Invalid(format!("block '{s}' is not dx,dy,n"))),
            }
        }
        let omega = parse::pairs(&self.omega)?;
        let (a, b) = (set(&f, &self.a)?, set(&f, &self.b)?);
        let r = count_union_structured(&f, &g, &blocks, &omega, &a, &b)?;
        let s_size: usize = blocks.iter().map(|b| b.family.len()).sum::<usize>() + omega.len();
        let rec = rec
            .put("prime", self.prime)
            .put("g", self.g.as_str())
            .put("blocks", self.block.join(" "))
            .put("omega", self.omega.as_str())
            .put("A", self.a.as_str())
            .put("B", self.b.as_str())
            .put("S_size", s_size);
        Ok(vec![count_fields(rec, &r)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct ProductArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "w")]
    g: String,
    /// H built from S = [N]²
    #[arg(long = "N", default_value_t = 3)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    l: u32,
}

impl ProductArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let h = build_h_set(&f, &parse::mat(&f, &self.g)?, &SFamily::grid(self.n, 1, 1)?)?;
        let st = product_multiplicity(&f, &h, self.l, budget_from_env())?;
        let total = num_pow(h.len(), 2 * self.l);
        Ok(vec![rec
            .put("prime", self.prime)
            .put("g", self.g.as_str())
            .put("N", self.n)
            .put("l", self.l)
            .put("H_size", h.len())
            .put("linf", st.linf)
            .put("l2", st.l2.to_string())
            .put("support", st.support)
            .put("total", total)])
    }
}

fn num_pow(base: usize, e: u32) -> String {
    num_bigint::BigUint::from(base).pow(e).to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SubgroupKind {
    Whole,
    Borel,
    Dihedral,
}

#[derive(Args, Debug, Clone)]
pub struct MassArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "w")]
    g: String,
    #[arg(long = "N", default_value_t = 3)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[arg(long, value_enum, default_value_t = SubgroupKind::Borel)]
    subgroup: SubgroupKind,
    #[arg(long, default_value = "id")]
    g1: String,
    #[arg(long, default_value = "id")]
    g2: String,
    /// Non-square for C_ε; defaults to the least one
    #[arg(long)]
    eps: Option<i64>,
    #[arg(long, default_value = "id")]
    z: String,
}

impl MassArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let h = build_h_set(&f, &parse::mat(&f, &self.g)?, &SFamily::grid(self.n, 1, 1)?)?;
        let rec = rec.put("prime", self.prime).put("g", self.g.as_str()).put("N", self.n).put("l", self.l);
        let (rec, spec) = match self.subgroup {
            SubgroupKind::Whole => (rec.put("subgroup", "whole"), SubgroupSpec::Whole),
            SubgroupKind::Borel => (
                rec.put("subgroup", "borel").put("g1", self.g1.as_str()).put("g2", self.g2.as_str()),
                SubgroupSpec::Borel { g1: parse::mat(&f, &self.g1)?, g2: parse::mat(&f, &self.g2)? },
            ),
            SubgroupKind::Dihedral => {
                let eps = self.eps.map_or_else(|| f.smallest_non_residue(), |e| f.elem(e));
                (
                    rec.put("subgroup", "dihedral").put("eps", eps.value()).put("z", self.z.as_str()),
                    SubgroupSpec::Dihedral { eps, z: parse::mat(&f, &self.z)? },
                )
            }
        };
        let m = subgroup_mass(&f, &h, self.l, &spec, budget_from_env())?;
        Ok(vec![rec
            .put("H_size", h.len())
            .put("mass", m.mass.to_string())
            .put("total", m.total.to_string())
            .float("K", m.k)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct Cont2Args {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "qr")]
    a: String,
    #[arg(long, default_value = "qr")]
    b: String,
    #[arg(long, default_value = "qr")]
    c: String,
    /// Intersect all three sets with the interval `lo..hi`
    #[arg(long)]
    within: Option<String>,
}

impl Cont2Args {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let window = match &self.within {
            Some(w) => Some(set(&f, &format!("interval:{w}"))?),
            None => None,
        };
        let clip = |s: PointSet| match &window {
            Some(w) => PointSet::from_elems(f.p(), s.iter().filter(|&x| w.contains(x))),
            None => s,
        };
        let (a, b, c) = (clip(set(&f, &self.a)?), clip(set(&f, &self.b)?), clip(set(&f, &self.c)?));
        let energy = count_cont2_energy(&f, &a, &b, &c);
        let ec = additive_energy(&f, &c);
        let bound = cont2_bound_shape(a.len(), b.len(), c.len(), &ec);
        let ratio = energy.to_f64().unwrap_or(f64::NAN) / bound;
        Ok(vec![rec
            .put("prime", self.prime)
            .put("A", self.a.as_str())
            .put("B", self.b.as_str())
            .put("C", self.c.as_str())
            .put("within", self.within.clone().unwrap_or_default())
            .put("A_size", a.len())
            .put("B_size", b.len())
            .put("C_size", c.len())
            .put("energy", energy.to_string())
            .put("image_size_A", image_size_cont2(&f, &a))
            .put("additive_energy_C", ec.to_string())
            .float("bound_shape", bound)
            .float("energy_over_bound", ratio)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct MobiusArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "qr")]
    a: String,
    #[arg(long, default_value = "qr")]
    b: String,
    /// `random:m:seed` (distinct SL2 elements) or matrices `a,b,c,d;...`
    #[arg(long, default_value = "random:10:0")]
    t: String,
}

impl MobiusArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let t = match self.t.strip_prefix("random:") {
            Some(rest) => {
                let (m, seed) = rest.split_once(':').ok_or_else(|| LabError::Invalid(format!("bad T '{}'", self.t)))?;
                let m: usize = m.parse().map_err(|_| LabError::Invalid(format!("bad T '{}'", self.t)))?;
                let seed: u64 = seed.parse().map_err(|_| LabError::Invalid(format!("bad T '{}'", self.t)))?;
                let group = Sl2Group::new(f.clone());
                if m > group.order() {
                    return Err(LabError::Invalid(format!("|T| = {m} exceeds |SL2|")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rand::seq::index::sample(&mut rng, group.order(), m).into_iter().map(|i| group.element(i)).collect()
            }
            None => parse::mats(&f, &self.t)?,
        };
        let (a, b) = (set(&f, &self.a)?, set(&f, &self.b)?);
        let count = count_mobius_incidences(&f, &a, &b, &t);
        let bound = incidence_bound_shape(a.len(), b.len(), t.len());
        Ok(vec![rec
            .put("prime", self.prime)
            .put("A", self.a.as_str())
            .put("B", self.b.as_str())
            .put("T", self.t.as_str())
            .put("T_size", t.len())
            .put("count", count)
            .float("bound_shape", bound)
            .float("count_over_bound", count as f64 / bound)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct FqArgs {
    /// p ≡ 3 mod 4
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "all")]
    a: String,
    #[arg(long, default_value = "all")]
    b: String,
    #[arg(long, default_value = "all")]
    c: String,
    #[arg(long, default_value = "all")]
    d: String,
    /// `re,im`
    #[arg(long, default_value = "1,1")]
    lambda: String,
}

impl FqArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let fq = FqCtx::new(field(self.prime)?)?;
        let build = |s: &str| -> Result<_> { s.parse::<SetSpec>()?.build_fq(&fq) };
        let (a, b, c, d) = (build(&self.a)?, build(&self.b)?, build(&self.c)?, build(&self.d)?);
        let lam = match parse::ints(&self.lambda)?[..] {
            [re, im] => fq.elem(re, im),
            _ => return Err(LabError::Invalid(format!("lambda '{}' is not re,im", self.lambda))),
        };
        let r = count_fq_system(&fq, &a, &b, &c, &d, lam)?;
        let rec = rec
            .put("prime", self.prime)
            .put("A", self.a.as_str())
            .put("B", self.b.as_str())
            .put("C", self.c.as_str())
            .put("D", self.d.as_str())
            .put("lambda", self.lambda.as_str())
            .put("sizes", format!("{} {} {} {}", a.len(), b.len(), c.len(), d.len()));
        Ok(vec![count_fields(rec, &r)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Exact,
    Float,
}

#[derive(Args, Debug, Clone)]
pub struct MarkovArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long, default_value = "w")]
    g: String,
    #[arg(long, default_value_t = 1)]
    gamma: i64,
    #[arg(long, default_value_t = 40)]
    nmax: usize,
    /// half-lazy | three-point
    #[arg(long, default_value = "half-lazy")]
    variant: String,
    /// Starting state; `inf` for ∞
    #[arg(long, default_value = "1")]
    start: String,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
}

impl MarkovArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let lz: Laziness = self.variant.parse()?;
        let spec = ChainSpec::new(&f, parse::mat(&f, &self.g)?, f.elem(self.gamma), lz)?;
        let start = match self.start.as_str() {
            "inf" => ProjPoint::Infinity,
            s => ProjPoint::Finite(f.elem(s.parse().map_err(|_| LabError::Invalid(format!("bad start '{s}'")))?)),
        };
        let mode = match self.mode {
            Mode::Auto => EvolveMode::Auto,
            Mode::Exact => EvolveMode::Exact,
            Mode::Float => EvolveMode::Float,
        };
        let prof = mix_profile(&spec, start, self.nmax, mode)?;
        let base = rec
            .put("prime", self.prime)
            .put("g", self.g.as_str())
            .put("gamma", self.gamma)
            .put("variant", self.variant.as_str())
            .put("start", self.start.as_str())
            .put("exact", prof.exact);
        Ok(prof
            .rows
            .iter()
            .map(|r| {
                base.clone()
                    .put("n", r.n)
                    .float("tv_p1", r.tv_p1)
                    .float("tv_fpstar", r.tv_fpstar)
                    .float("fit_slope", prof.slope)
            })
            .collect())
    }
}

/// Γ of order `order`, default the quadratic residues.
fn subgroup(f: &FieldCtx, order: Option<u64>) -> Result<Subgroup> {
    Subgroup::new(f, order.unwrap_or((f.p() - 1) / 2))
}

fn spec_from(f: &FieldCtx, alphas: &str, betas: &str) -> Result<ShiftSpec> {
    ShiftSpec::new(&parse::elems(f, alphas)?, &parse::elems(f, betas)?)
}

fn spec_string(spec: &ShiftSpec) -> String {
    spec.components().iter().map(|c| format!("{}:{}", c.alpha.value(), c.beta.value())).collect::<Vec<_>>().join(" ")
}

fn join_set(s: &PointSet) -> String {
    s.values().iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Args, Debug, Clone)]
pub struct ShiftArgs {
    #[arg(long)]
    prime: u64,
    /// Order of Γ; default (p-1)/2
    #[arg(long)]
    order: Option<u64>,
    #[arg(long, default_value = "1")]
    alphas: String,
    #[arg(long, default_value = "0")]
    betas: String,
}

impl ShiftArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let gamma = subgroup(&f, self.order)?;
        let spec = spec_from(&f, &self.alphas, &self.betas)?;
        let s = shifted_intersection(&f, &gamma, &spec);
        Ok(vec![rec
            .put("prime", self.prime)
            .put("order", gamma.order())
            .put("spec", spec_string(&spec))
            .put("size", s.len())
            .put("elements", join_set(&s))])
    }
}

#[derive(Args, Debug, Clone)]
pub struct TransportArgs {
    #[arg(long, required_unless_present = "random")]
    prime: Option<u64>,
    #[arg(long)]
    order: Option<u64>,
    #[arg(long, default_value = "1,1")]
    alphas: String,
    #[arg(long, default_value = "0,8")]
    betas: String,
    #[arg(long, default_value = "w")]
    g: String,
    /// Number of random instances instead of one explicit instance
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value = "2,3,4")]
    k: String,
    #[arg(long, default_value_t = 499)]
    pmax: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TransportArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        if let Some(n) = self.random {
            let ks: Vec<usize> = parse::ints(&self.k)?.into_iter().map(|k| k as usize).collect();
            let (failures, sizes) = random_transport_runs(n, &ks, self.pmax, self.seed)?;
            return Ok(vec![rec
                .put("instances", n)
                .put("k", self.k.as_str())
                .put("pmax", self.pmax)
                .put("seed", self.seed)
                .put("nonempty", sizes)
                .put("failures", failures)]);
        }
        let p = self.prime.expect("clap enforces");
        let f = field(p)?;
        let gamma = subgroup(&f, self.order)?;
        let spec = spec_from(&f, &self.alphas, &self.betas)?;
        let g = parse::mat(&f, &self.g)?;
        let (out, ok) = verify_transport(&f, &g, &gamma, &spec)?;
        let image = shifted_intersection(&f, &gamma, &out);
        Ok(vec![rec
            .put("prime", p)
            .put("order", gamma.order())
            .put("g", self.g.as_str())
            .put("spec", spec_string(&spec))
            .put("input", join_set(&shifted_intersection(&f, &gamma, &spec)))
            .put("transported", spec_string(&out))
            .put("image", join_set(&image))
            .put("ok", ok)])
    }
}

/// `(failures, instances with a nonempty source set)`.
pub fn random_transport_runs(n: usize, ks: &[usize], pmax: u64, seed: u64) -> Result<(usize, usize)> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(LabError::Invalid("k list must be nonempty and positive".into()));
    }
    let primes: Vec<u64> = primes_up_to(pmax).into_iter().filter(|&p| p >= 5).collect();
    if primes.is_empty() {
        return Err(LabError::Invalid(format!("no primes in [5, {pmax}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut failures, mut nonempty) = (0, 0);
    for i in 0..n {
        let p = primes[rng.gen_range(0..primes.len())];
        let f = field(p)?;
        let divisors = divisors(p - 1);
        let gamma = Subgroup::new(&f, divisors[rng.gen_range(0..divisors.len())])?;
        let k = ks[i % ks.len()];
        let (g, spec) = random_transport_instance(&f, k, &mut rng);
        let (_, ok) = verify_transport(&f, &g, &gamma, &spec)?;
        failures += usize::from(!ok);
        nonempty += usize::from(!shifted_intersection(&f, &gamma, &spec).is_empty());
    }
    Ok((failures, nonempty))
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for q in distinct_prime_factors(n) {
        let mut m = n;
        let mut e = 0;
        while m.is_multiple_of(q) {
            m /= q;
            e += 1;
        }
        let base = out.clone();
        let mut pw = 1;
        for _ in 0..e {
            pw *= q;
            out.extend(base.iter().map(|d| d * pw));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Args, Debug, Clone)]
pub struct WeilArgs {
    #[arg(long, required_unless_present = "pmax")]
    prime: Option<u64>,
    #[arg(long, default_value = "1")]
    shifts: String,
    /// Scan every prime up to pmax with random shift tuples
    #[arg(long)]
    pmax: Option<u64>,
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    #[arg(long, default_value_t = 100)]
    tuples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl WeilArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        if let Some(pmax) = self.pmax {
            let s = weil_scan(pmax, self.kmax, self.tuples, self.seed)?;
            return Ok(vec![rec
                .put("pmax", pmax)
                .put("kmax", self.kmax)
                .put("tuples", self.tuples)
                .put("seed", self.seed)
                .put("checks", s.checks)
                .put("violations", s.violations)
                .float("max_size_over_bound", s.max_ratio)]);
        }
        let p = self.prime.expect("clap enforces");
        let f = field(p)?;
        let r = weil_bound_check(&f, &parse::elems(&f, &self.shifts)?)?;
        Ok(vec![rec
            .put("prime", p)
            .put("shifts", self.shifts.as_str())
            .put("size", r.size)
            .float("bound", r.bound)
            .put("ok", r.ok)])
    }
}

pub struct WeilScan {
    pub checks: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

/// Every odd prime `5 <= p <= pmax`, every `k <= kmax` (capped at `p - 1`),
/// `tuples` random distinct nonzero shift tuples each.
pub fn weil_scan(pmax: u64, kmax: usize, tuples: usize, seed: u64) -> Result<WeilScan> {
    let primes: Vec<u64> = primes_up_to(pmax).into_iter().filter(|&p| p >= 5).collect();
    let per_prime = sl2lab::par::map_slice(&primes, |&p| -> Result<(usize, usize, f64)> {
        let f = field(p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p);
        let (mut checks, mut bad, mut worst) = (0, 0, 0f64);
        for k in 1..=kmax.min(p as usize - 1) {
            for _ in 0..tuples {
                let shifts: Vec<_> = rand::seq::index::sample(&mut rng, p as usize - 1, k)
                    .into_iter()
                    .map(|i| f.from_u64(i as u64 + 1))
                    .collect();
                let r = weil_bound_check(&f, &shifts)?;
                checks += 1;
                bad += usize::from(!r.ok);
                worst = worst.max(r.size as f64 / r.bound);
            }
        }
        Ok((checks, bad, worst))
    });
    let mut out = WeilScan { checks: 0, violations: 0, max_ratio: 0.0 };
    for r in per_prime {
        let (c, b, w) = r?;
        out.checks += c;
        out.violations += b;
        out.max_ratio = out.max_ratio.max(w);
    }
    Ok(out)
}

#[derive(Args, Debug, Clone)]
pub struct ShrinkArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long)]
    order: Option<u64>,
    /// Initial shift set S
    #[arg(long, default_value = "1")]
    s: String,
    #[arg(long, default_value_t = 6)]
    steps: usize,
    /// Also scan z ∈ 2·[N]
    #[arg(long, default_value_t = 0)]
    nscan: u64,
    /// Run even when -1 ∉ Γ
    #[arg(long)]
    allow_asymmetric: bool,
}

impl ShrinkArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let f = field(self.prime)?;
        let gamma = subgroup(&f, self.order)?;
        let opts = ShrinkOptions { steps: self.steps, n_scan: self.nscan, require_symmetric: !self.allow_asymmetric };
        let tr = constructive_shrink(&f, &gamma, &parse::elems(&f, &self.s)?, &opts)?;
        let base = rec
            .put("prime", self.prime)
            .put("order", gamma.order())
            .put("S", self.s.as_str())
            .put("bookkeeping_ok", tr.bookkeeping_ok)
            .float("ratio_product", tr.ratio_product)
            .put("stopped", tr.stopped.clone().unwrap_or_default());
        let base = match &tr.z_scan {
            Some(z) => base.put("best_z", z.best_z).float("best_z_ratio", z.best_ratio),
            None => base,
        };
        let mut rows = vec![base
            .clone()
            .put("step", 0)
            .put("move", "")
            .put("x", "")
            .put("size", tr.initial_size)
            .put("t_size", tr.initial_t)
            .put("ratio", "")
            .put("spec", "")];
        for s in &tr.steps {
            let spec = s.spec.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(" ");
            rows.push(
                base.clone()
                    .put("step", s.step)
                    .put("move", serde_json::to_value(s.mv).expect("enum"))
                    .put("x", s.x)
                    .put("size", s.size)
                    .put("t_size", s.t_size)
                    .float("ratio", s.ratio)
                    .put("spec", spec),
            );
        }
        Ok(rows)
    }
}

#[derive(Args, Debug, Clone)]
pub struct QrArgs {
    #[arg(long, required_unless_present = "pmax", conflicts_with = "pmax")]
    prime: Option<u64>,
    /// Every odd prime up to pmax
    #[arg(long)]
    pmax: Option<u64>,
    /// Running maximum taken over p >= from
    #[arg(long, default_value_t = 1000)]
    from: u64,
    /// One summary row instead of a row per prime
    #[arg(long)]
    summary: bool,
}

impl QrArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        if let Some(pmax) = self.pmax {
            let scan = gap_scan(pmax, self.from);
            if self.summary {
                let total: u64 = scan.rows.iter().map(|r| r.d).sum();
                return Ok(vec![rec
                    .put("pmax", pmax)
                    .put("primes", scan.rows.len())
                    .put("from", self.from)
                    .float("max_ratio", scan.max_ratio)
                    .put("argmax", scan.argmax)
                    .put("sum_d", total)]);
            }
            return Ok(scan
                .rows
                .iter()
                .map(|r| rec.clone().put("p", r.p).put("d", r.d).float("ratio", r.ratio).put("gap_start", r.gap_start))
                .collect());
        }
        let f = field(self.prime.expect("clap enforces"))?;
        let r = qr_gap(&f);
        let inc = residue_run_inclusion_check(&f, 3);
        Ok(vec![rec
            .put("p", r.p)
            .put("d", r.d)
            .float("ratio", r.ratio)
            .put("gap_start", r.gap_start)
            .put("residue_run", r.residue_run)
            .put("residue_run_start", r.residue_run_start)
            .put("nonresidue_run", r.nonresidue_run)
            .put("nonresidue_run_start", r.nonresidue_run_start)
            .put("inclusion_checked", inc.checks.iter().map(|c| c.checked).sum::<u64>())
            .put("inclusion_violations", inc.violations)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct RatioArgs {
    #[arg(long, required_unless_present = "random")]
    prime: Option<u64>,
    #[arg(long, default_value_t = 0)]
    a: u64,
    #[arg(long = "H", default_value_t = 4)]
    h: u64,
    #[arg(long = "Hstar", default_value_t = 2)]
    hstar: u64,
    /// Number of random admissible instances
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pmax: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RatioArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        if let Some(n) = self.random {
            let (min, mean) = random_ratio_runs(n, self.pmax, self.seed)?;
            return Ok(vec![rec
                .put("instances", n)
                .put("pmax", self.pmax)
                .put("seed", self.seed)
                .float("min_ratio", min)
                .float("mean_ratio", mean)]);
        }
        let p = self.prime.expect("clap enforces");
        let r = ratio_set_count(&field(p)?, self.a, self.h, self.hstar)?;
        Ok(vec![rec
            .put("prime", p)
            .put("a", self.a)
            .put("H", self.h)
            .put("Hstar", self.hstar)
            .put("count", r.count)
            .put("lower", r.lower)
            .float("ratio", r.ratio)])
    }
}

/// One random instance with `16 H_*^2 H < p`, `H_* <= H`, `a + H < p`.
pub fn random_ratio_instance<R: Rng>(primes: &[u64], rng: &mut R) -> (u64, u64, u64, u64) {
    let p = primes[rng.gen_range(0..primes.len())];
    let hmax = (p - 1) / 16;
    let h = rng.gen_range(1..=hmax);
    // largest H_* with 16 H_*^2 H < p
    let mut smax = ((p - 1) as f64 / (16.0 * h as f64)).sqrt() as u64;
    while 16 * (smax + 1) * (smax + 1) * h < p {
        smax += 1;
    }
    while smax > 0 && 16 * smax * smax * h >= p {
        smax -= 1;
    }
    let hstar = rng.gen_range(1..=smax.clamp(1, h));
    let a = rng.gen_range(0..p - h);
    (p, a, h, hstar)
}

/// `(min, mean)` of `count / (H_* H)`.
pub fn random_ratio_runs(n: usize, pmax: u64, seed: u64) -> Result<(f64, f64)> {
    let primes: Vec<u64> = primes_up_to(pmax).into_iter().filter(|&p| p > 16).collect();
    if primes.is_empty() || n == 0 {
        return Err(LabError::Invalid("need pmax > 16 and at least one instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut min, mut sum) = (f64::INFINITY, 0.0);
    for _ in 0..n {
        let (p, a, h, hstar) = random_ratio_instance(&primes, &mut rng);
        let r = ratio_set_count(&field(p)?, a, h, hstar)?;
        min = min.min(r.ratio);
        sum += r.ratio;
    }
    Ok((min, sum / n as f64))
}

#[derive(Args, Debug, Clone)]
pub struct PingArgs {
    #[arg(long, default_value = "2")]
    s: String,
    #[arg(long, default_value = "2")]
    t: String,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 3)]
    exp: i64,
}

impl PingArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let r = verify_ping_pong(&parse::gauss(&self.s)?, &parse::gauss(&self.t)?, self.blocks, self.exp)?;
        let first = r.violations.first().map(Word::to_string).unwrap_or_default();
        Ok(vec![rec
            .put("s", self.s.as_str())
            .put("t", self.t.as_str())
            .put("blocks", self.blocks)
            .put("exp", self.exp)
            .put("words", r.words)
            .put("scalar_words", r.violations.len())
            .put("first_scalar_word", first)
            .put("collisions", r.collisions)
            .float("min_offdiag", r.min_offdiag)])
    }
}

#[derive(Args, Debug, Clone)]
pub struct ReconArgs {
    #[arg(long, default_value = "2")]
    s: String,
    #[arg(long, default_value = "2")]
    t: String,
    /// Evaluate this word, then reconstruct it from its column
    #[arg(long, conflicts_with_all = ["b", "d"])]
    word: Option<String>,
    #[arg(long, requires = "d")]
    b: Option<String>,
    #[arg(long, requires = "b")]
    d: Option<String>,
    #[arg(long, default_value_t = 64)]
    max_blocks: usize,
}

impl ReconArgs {
    fn run(&self, rec: Record) -> Result<Vec<Record>> {
        let (s, t) = (parse::gauss(&self.s)?, parse::gauss(&self.t)?);
        let rec = rec.put("s", self.s.as_str()).put("t", self.t.as_str());
        let (rec, b, d, want) = match (&self.word, &self.b, &self.d) {
            (Some(w), _, _) => {
                let word: Word = w.parse()?;
                let m = eval_word(&word, &s, &t)?;
                (rec.put("input", word.to_string()), m.b, m.d, Some(word.canonical()))
            }
            (None, Some(b), Some(d)) => (rec, parse::gauss(b)?, parse::gauss(d)?, None),
            _ => return Err(LabError::Invalid("give --word or both --b and --d".into())),
        };
        let got = reconstruct_from_column(&b, &d, &s, &t, self.max_blocks)?;
        let rec = rec.put("b", b.to_string()).put("d", d.to_string()).put("word", got.to_string());
        Ok(vec![match want {
            Some(w) => rec.put("ok", w == got),
            None => rec,
        }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_lists() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(divisors(16), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn ratio_instances_are_admissible() {
        let primes: Vec<u64> = primes_up_to(5000).into_iter().filter(|&p| p > 16).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let (p, a, h, hs) = random_ratio_instance(&primes, &mut rng);
            assert!(hs >= 1 && hs <= h && a + h < p && 16 * hs * hs * h < p);
        }
    }

    #[test]
    fn experiment_table_matches_commands() {
        assert_eq!(EXPERIMENTS.len(), 19);
    }
}
